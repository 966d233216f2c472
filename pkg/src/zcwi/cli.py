"""Command-line surface.

Each subcommand fronts one library operation, writes its declared CSV/binary
artifacts (atomically), prints a one-line key=value summary on stdout, and
optionally renders a matplotlib figure next to the delimited output
(``--plot``).  Exit codes: 0 ok, 1 check-mode violation, 2 malformed
configuration or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io as zio
from . import plotting
from .crossings import detect_crossings
from .estimation import config_from_json, resolution_sweep, run_experiment
from .interferograms import (
    complex_crosslation,
    decimate_by_slew,
    empirical_autoference,
    empirical_crosslation,
    empirical_down,
    empirical_up,
    estimate_mu,
    slew_matched,
    spectrum_from_crosslation,
    weighted_autoference,
)
from .reference import (
    butterworth_gain,
    degrees_of_freedom,
    lorentzian_gain,
    woodward_constants,
)
from .signals import (
    BandLimited,
    Butterworth,
    FMCarrier,
    GaussianShape,
    ModifiedLorentzian,
    MultiSine,
    analytic_signal,
    delay_and_corrupt,
    synth_fm_carrier,
    synth_gaussian,
    synth_multisine,
)
from .streaming import StreamingCrosslator

EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_NUMERICAL = 3


class CommandError(Exception):
    """Raised for malformed configuration; maps to exit code 2."""


def _summary(**kv) -> None:
    parts = []
    for k, v in kv.items():
        if isinstance(v, float):
            parts.append(f"{k}={v:.10g}")
        else:
            parts.append(f"{k}={v}")
    print(" ".join(parts))


def _png_path(out, suffix="") -> str:
    p = Path(out)
    return str(p.with_suffix(suffix + ".png"))


# ---------------------------------------------------------------------------
# model construction from CLI flags
# ---------------------------------------------------------------------------


def _add_model_args(sp):
    sp.add_argument("--model", required=True,
                    choices=["bandlimited", "gaussian", "butterworth", "lorentzian",
                             "multisine", "fm"])
    sp.add_argument("--W", type=float, help="band edge / scale (rad/s)")
    sp.add_argument("--low", type=float, default=0.0, help="lower band edge (rad/s)")
    sp.add_argument("--bandwidth", type=float, help="rms bandwidth (rad/s)")
    sp.add_argument("--variance", type=float, default=1.0)
    sp.add_argument("--kappa", type=float, help="Butterworth shape parameter")
    sp.add_argument("--gamma", type=float, help="band-limiting parameter")
    sp.add_argument("--frequencies", type=str, help="comma-separated tone frequencies (Hz)")
    sp.add_argument("--amplitude", type=float, default=1.0)
    sp.add_argument("--carrier", type=float, help="FM carrier (Hz)")
    sp.add_argument("--noise-bandwidth", type=float, help="FM modulating-noise bandwidth (Hz)")
    sp.add_argument("--index", type=float, help="FM modulation index")


def _build_model(args):
    try:
        if args.model == "bandlimited":
            if args.W is None:
                raise CommandError("bandlimited model needs --W")
            return BandLimited(W=args.W, variance=args.variance, low=args.low)
        if args.model == "gaussian":
            if args.bandwidth is None:
                raise CommandError("gaussian model needs --bandwidth")
            return GaussianShape(bandwidth=args.bandwidth, variance=args.variance)
        if args.model == "butterworth":
            if args.kappa is None or args.W is None:
                raise CommandError("butterworth model needs --kappa and --W")
            return Butterworth(kappa=args.kappa, W=args.W)
        if args.model == "lorentzian":
            if args.gamma is None or args.W is None:
                raise CommandError("lorentzian model needs --gamma and --W")
            return ModifiedLorentzian(gamma=args.gamma, W=args.W, variance=args.variance)
        if args.model == "multisine":
            if not args.frequencies:
                raise CommandError("multisine model needs --frequencies")
            freqs = tuple(float(f) for f in args.frequencies.split(","))
            return MultiSine(frequencies=freqs, amplitude=args.amplitude)
        if args.model == "fm":
            if None in (args.carrier, args.noise_bandwidth, args.index):
                raise CommandError("fm model needs --carrier, --noise-bandwidth, --index")
            return FMCarrier(carrier_hz=args.carrier, noise_bandwidth_hz=args.noise_bandwidth,
                             modulation_index=args.index)
    except ValueError as e:
        raise CommandError(str(e)) from e
    raise CommandError(f"unknown model {args.model}")


def _load_waveform(path):
    try:
        return zio.read_waveform(path)
    except FileNotFoundError as e:
        raise CommandError(f"input waveform not found: {e}") from e


def _default_half_window(w, cs) -> float:
    # 10 / (rms bandwidth), the bandwidth taken from the crossing rate
    if len(cs) == 0:
        raise CommandError("waveform has no zero crossings")
    B = math.pi * cs.rate
    return min(10.0 / B, w.duration / 4.0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> None:
    model = _build_model(args)
    if args.model == "multisine":
        w = synth_multisine(model, args.n, args.dt, args.seed)
    elif args.model == "fm":
        w = synth_fm_carrier(model, args.n, args.dt, args.seed)
    else:
        w = synth_gaussian(model, args.n, args.dt, args.seed)
    if args.delay or not math.isinf(args.snr_db):
        w = delay_and_corrupt(w, args.delay, args.snr_db, args.seed + 1)
    zio.write_waveform(args.out, w)
    if args.csv:
        zio.waveform_to_csv(args.csv, w)
    if args.plot:
        plotting.plot_waveform(w.times(), w.samples, _png_path(args.out), w.label)
    _summary(command="synth", out=args.out, n=len(w), dt=w.dt,
             variance=float(np.var(w.samples)))


def cmd_crossings(args) -> None:
    w = _load_waveform(args.input)
    cs = detect_crossings(w, hysteresis=args.hysteresis)
    cs.to_csv(args.out)
    if args.plot:
        plotting.plot_crossings(w.times(), w.samples, cs.times, _png_path(args.out), w.label)
    _summary(command="crossings", out=args.out, n=len(cs), n_plus=cs.n_plus,
             n_minus=cs.n_minus, rate=cs.rate)


def _interferogram_for(args, w, cs):
    hw = args.half_window if args.half_window else _default_half_window(w, cs)
    if args.variant == "crosslation":
        return empirical_crosslation(w, cs, hw), hw
    if args.variant == "up":
        return empirical_up(w, cs, hw), hw
    if args.variant == "down":
        return empirical_down(w, cs, hw), hw
    if args.variant == "slew":
        return slew_matched(w, cs, hw), hw
    raise CommandError(f"unknown variant {args.variant}")


def cmd_crosslate(args) -> None:
    w = _load_waveform(args.input)
    cs = detect_crossings(w)
    if args.keep_steepest:
        cs = decimate_by_slew(cs, args.keep_steepest, method=args.decimation)
    ig, hw = _interferogram_for(args, w, cs)
    ig.to_csv(args.out)
    if args.plot:
        plotting.plot_interferogram(ig.lags, ig.values, _png_path(args.out),
                                    ig.stderr, f"{ig.variant} ({ig.n_used} events)")
    _summary(command="crosslate", out=args.out, variant=ig.variant, n_used=ig.n_used,
             half_window=hw, peak=float(np.max(np.abs(ig.values))))


def cmd_autoference(args) -> None:
    w = _load_waveform(args.input)
    pair = analytic_signal(w)
    cs = detect_crossings(pair.x)
    hw = args.half_window if args.half_window else _default_half_window(w, cs)
    ig = weighted_autoference(pair, hw) if args.weighted else empirical_autoference(pair, hw)
    ig.to_csv(args.out)
    if args.plot:
        plotting.plot_interferogram(ig.lags, ig.values, _png_path(args.out),
                                    ig.stderr, f"{ig.variant} ({ig.n_used} events)")
    _summary(command="autoference", out=args.out, variant=ig.variant, n_used=ig.n_used,
             half_window=hw, peak=float(np.max(np.abs(ig.values))))


def cmd_envelope(args) -> None:
    w = _load_waveform(args.input)
    pair = analytic_signal(w)
    cs = detect_crossings(pair.x)
    hw = args.half_window if args.half_window else _default_half_window(w, cs)
    C = empirical_crosslation(pair.x, cs, hw)
    A = empirical_autoference(pair, hw)
    cx = complex_crosslation(C, A)
    cx.to_csv(args.out)
    if args.nyquist:
        cx.nyquist_csv(args.nyquist)
    if args.plot:
        plotting.plot_envelope(cx.lags, cx.A.values, cx.C.values, cx.envelope,
                               _png_path(args.out), w.label)
        if args.nyquist:
            plotting.plot_nyquist(cx.A.values, cx.C.values, _png_path(args.nyquist), w.label)
    k = int(np.argmax(cx.envelope))
    _summary(command="envelope", out=args.out, n_used=C.n_used,
             peak=float(cx.envelope[k]), peak_tau=float(cx.lags[k]))


def cmd_spectrum(args) -> None:
    w = _load_waveform(args.input)
    cs = detect_crossings(w)
    hw = args.half_window if args.half_window else _default_half_window(w, cs)
    ig = empirical_crosslation(w, cs, hw)
    mu = estimate_mu(w)
    omega, density = spectrum_from_crosslation(ig, mu, cs.rate)
    zio.write_csv(args.out, ("omega", "density"), np.column_stack([omega, density]))
    if args.plot:
        plotting.plot_spectrum(omega, density, _png_path(args.out), w.label)
    k = int(np.argmax(density))
    _summary(command="spectrum", out=args.out, mu=mu, rate=cs.rate,
             peak_omega=float(omega[k]))


def cmd_resolution(args) -> None:
    if args.sweep:
        lo, hi, num = args.sweep
        grid = np.linspace(lo, hi, int(num))
        rows = resolution_sweep(args.family, grid, empirical_at=args.empirical_at or ())
        zio.write_csv(args.out, ("parameter", "gain", "empirical_gain"), rows)
        if args.plot:
            r = np.asarray(rows)
            plotting.plot_curve(r[:, 0], r[:, 1], _png_path(args.out),
                                "shape parameter", "resolution gain",
                                f"{args.family} resolution gain")
        _summary(command="resolution", family=args.family, out=args.out, rows=len(rows))
        return
    if args.family == "butterworth":
        if args.kappa is None:
            raise CommandError("butterworth needs --kappa")
        gain = butterworth_gain(args.kappa)
        _summary(command="resolution", family="butterworth", kappa=args.kappa, gain=gain)
    elif args.family == "lorentzian":
        if args.gamma is None:
            raise CommandError("lorentzian needs --gamma")
        gain = lorentzian_gain(args.gamma)
        _summary(command="resolution", family="lorentzian", gamma=args.gamma, gain=gain)
    else:
        model = _build_model(args)
        rep = woodward_constants(model)
        _summary(command="resolution", family=args.model, delta_tau=rep.delta_tau,
                 delta_tau_c=rep.delta_tau_c, gain=rep.gain, method=rep.method)


def cmd_dof(args) -> None:
    if args.sweep_gamma:
        lo, hi, num = args.sweep_gamma
        rows = []
        for g in np.linspace(lo, hi, int(num)):
            model = ModifiedLorentzian(gamma=float(g), W=args.W or 1.0)
            rep = degrees_of_freedom(model, args.duration)
            W = args.W or 1.0
            rows.append((float(g), rep.dof / (W * args.duration),
                         rep.n_c_expected / (W * args.duration)))
        zio.write_csv(args.out, ("gamma", "dof_per_WT", "crossings_per_WT"), rows)
        if args.plot:
            r = np.asarray(rows)
            plotting.plot_dof_curves(r[:, 0], r[:, 1], r[:, 2], _png_path(args.out))
        _summary(command="dof", out=args.out, rows=len(rows))
        return
    model = _build_model(args)
    rep = degrees_of_freedom(model, args.duration)
    _summary(command="dof", family=args.model, duration=args.duration, dof=rep.dof,
             n_c_expected=rep.n_c_expected, regime=rep.regime)


def cmd_reference(args) -> None:
    """Tabulate closed-form reference curves on a lag grid."""
    from .reference import (
        bandlimited_family,
        lorentzian_family,
        structure_global_gaussian,
        structure_local_gaussian,
    )

    tau = np.linspace(-args.tau_max, args.tau_max, args.points)
    if args.curves == "structure":
        local = structure_local_gaussian(args.bandwidth or 1.0, args.variance, tau)
        glob = structure_global_gaussian(args.bandwidth or 1.0, args.variance, tau)
        zio.write_csv(args.out, ("tau", "local", "global_half"),
                      np.column_stack([tau, local, glob / 2.0]))
        if args.plot:
            plotting.plot_envelope(tau, local, glob / 2.0, np.maximum(local, glob / 2.0),
                                   _png_path(args.out), "structure functions")
    elif args.curves == "bandlimited":
        if args.W is None:
            raise CommandError("bandlimited curves need --W")
        fam = bandlimited_family(args.W, math.sqrt(args.variance), tau)
        zio.write_csv(args.out, ("tau", "R", "RXY", "envR", "C", "A", "envA"),
                      np.column_stack([tau, fam["R"], fam["RXY"], fam["envR"],
                                       fam["C"], fam["A"], fam["envA"]]))
        if args.plot:
            plotting.plot_envelope(tau, fam["A"], fam["C"], fam["envA"],
                                   _png_path(args.out), "band-limited crosslation family")
    elif args.curves == "lorentzian":
        if args.gamma is None or args.W is None:
            raise CommandError("lorentzian curves need --gamma and --W")
        fam = lorentzian_family(args.gamma, args.W, args.variance, tau)
        zio.write_csv(args.out, ("tau", "R", "HR", "envR", "C", "A", "envA"),
                      np.column_stack([tau, fam["R"], fam["HR"], fam["envR"],
                                       fam["C"], fam["A"], fam["envA"]]))
        if args.plot:
            plotting.plot_envelope(tau, fam["A"], fam["C"], fam["envA"],
                                   _png_path(args.out), "band-limited Lorentzian family")
    else:
        raise CommandError(f"unknown curve set {args.curves}")
    _summary(command="reference", curves=args.curves, out=args.out, points=args.points)


def cmd_stream(args) -> None:
    sc = StreamingCrosslator(m=args.m, dt=args.dt, mode=args.mode,
                             detector_index=args.detector_index,
                             averaging=args.averaging, forgetting=args.forgetting)
    out = sys.stdout
    events_at_last_frame = 0
    frames = 0

    def emit():
        nonlocal frames
        rep = sc.snapshot()
        ig = rep.interferogram
        out.write(f"# events={rep.events_processed} mode={rep.mode}\n")
        out.write("tau,value,stderr\n")
        err = ig.stderr if ig.stderr is not None else np.zeros_like(ig.values)
        for t, v, e in zip(ig.lags, ig.values, err):
            out.write(f"{t:.9g},{v:.9g},{e:.9g}\n")
        out.write("\n")
        frames += 1

    stream = sys.stdin.buffer
    leftover = b""
    while True:
        chunk = stream.read(8 * 4096)
        if not chunk:
            break
        data = leftover + chunk
        usable = len(data) - len(data) % 8  # pipes may deliver partial floats
        leftover = data[usable:]
        for v in np.frombuffer(data[:usable], dtype="<f8"):
            sc.push_sample(float(v))
            if sc.event_count - events_at_last_frame >= args.every:
                emit()
                events_at_last_frame = sc.event_count
    emit()
    print(f"# summary events={sc.event_count} frames={frames}", file=sys.stderr)


def cmd_delay_sim(args) -> None:
    try:
        cfg, check = config_from_json(Path(args.config).read_text())
    except FileNotFoundError as e:
        raise CommandError(f"config not found: {e}") from e
    except (ValueError, KeyError, TypeError) as e:
        raise CommandError(f"malformed config: {e}") from e
    report = run_experiment(cfg)
    rows = report.to_rows()
    zio.write_named_csv(args.out, ("metric", "value"), rows)
    _summary(command="delay_sim", estimator=cfg.estimator, trials=cfg.trials,
             bias=report.bias, variance=report.variance, rmse=report.rmse,
             cr_var_correlation=report.cr_bound.var_correlation,
             cr_var_crosslation=report.cr_bound.var_crosslation,
             n_c=report.n_c_mean, dof=report.dof)
    if check:
        ok = True
        if "max_rmse" in check and report.rmse > float(check["max_rmse"]):
            ok = False
        if check.get("variance_at_least_bound"):
            bound = (report.cr_bound.var_crosslation
                     if cfg.estimator != "correlation_env"
                     else report.cr_bound.var_correlation)
            if report.variance < bound - 3.0 * report.variance_stderr:
                ok = False
        if "max_abs_bias" in check and abs(report.bias) > float(check["max_abs_bias"]):
            ok = False
        if not ok:
            raise SystemExit(EXIT_CHECK_FAILED)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="zcwi",
        description="zero-crossing waveform interferometry: synthesis, crosslation, "
        "autoference, resolution analysis, streaming and delay estimation",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="synthesize a test waveform")
    _add_model_args(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--dt", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--delay", type=float, default=0.0,
                    help="apply a fractional delay (wrap region flagged untrusted)")
    sp.add_argument("--snr-db", type=float, default=math.inf,
                    help="add white noise at this SNR")
    sp.add_argument("--out", required=True, help="output .f64 (JSON sidecar added)")
    sp.add_argument("--csv", help="also export (t, value) CSV")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("crossings", help="detect zero crossings")
    sp.add_argument("--input", required=True)
    sp.add_argument("--hysteresis", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_crossings)

    sp = sub.add_parser("crosslate", help="empirical crosslation function")
    sp.add_argument("--input", required=True)
    sp.add_argument("--half-window", type=float, default=0.0)
    sp.add_argument("--variant", default="crosslation",
                    choices=["crosslation", "up", "down", "slew"])
    sp.add_argument("--keep-steepest", type=int, default=0,
                    help="decimate to this many steepest crossings first")
    sp.add_argument("--decimation", default="trim", choices=["trim", "threshold"])
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_crosslate)

    sp = sub.add_parser("autoference", help="empirical autoference function")
    sp.add_argument("--input", required=True)
    sp.add_argument("--half-window", type=float, default=0.0)
    sp.add_argument("--weighted", action="store_true")
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_autoference)

    sp = sub.add_parser("envelope", help="complex crosslation components and envelope")
    sp.add_argument("--input", required=True)
    sp.add_argument("--half-window", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--nyquist", help="also write the (A, C) Nyquist trace CSV")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_envelope)

    sp = sub.add_parser("spectrum", help="spectral density from the crosslation function")
    sp.add_argument("--input", required=True)
    sp.add_argument("--half-window", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("resolution", help="resolution constants and gains")
    _add_model_args(sp)
    sp.add_argument("--family", choices=["butterworth", "lorentzian", "model"],
                    default="model",
                    help="closed-form gain family, or 'model' for --model constants")
    sp.add_argument("--sweep", type=float, nargs=3, metavar=("LO", "HI", "N"))
    sp.add_argument("--empirical-at", type=float, nargs="*",
                    help="sweep points that also get a simulated-envelope gain")
    sp.add_argument("--out", default="resolution.csv")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_resolution)
    # --model not needed for the closed-form families
    for a in sp._actions:
        if "--model" in getattr(a, "option_strings", ()):
            a.required = False

    sp = sub.add_parser("dof", help="degrees of freedom vs crossing count")
    _add_model_args(sp)
    sp.add_argument("--duration", type=float, default=1.0)
    sp.add_argument("--sweep-gamma", type=float, nargs=3, metavar=("LO", "HI", "N"))
    sp.add_argument("--out", default="dof.csv")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_dof)
    for a in sp._actions:
        if "--model" in getattr(a, "option_strings", ()):
            a.required = False

    sp = sub.add_parser("reference", help="tabulate closed-form reference curves")
    sp.add_argument("--curves", required=True,
                    choices=["structure", "bandlimited", "lorentzian"])
    sp.add_argument("--W", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--bandwidth", type=float, help="rms bandwidth for structure curves")
    sp.add_argument("--variance", type=float, default=1.0)
    sp.add_argument("--tau-max", type=float, default=6.0)
    sp.add_argument("--points", type=int, default=481)
    sp.add_argument("--out", default="reference.csv")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_reference)

    sp = sub.add_parser("stream", help="streaming crosslator on stdin float64 samples")
    sp.add_argument("--m", type=int, default=256)
    sp.add_argument("--dt", type=float, required=True)
    sp.add_argument("--mode", default="future_in_the_past",
                    choices=["past_only", "future_in_the_past"])
    sp.add_argument("--detector-index", type=int, default=None)
    sp.add_argument("--averaging", default="fixed", choices=["fixed", "recursive"])
    sp.add_argument("--forgetting", type=float, default=1.0)
    sp.add_argument("--every", type=int, default=64,
                    help="emit a snapshot frame every N events")
    sp.set_defaults(func=cmd_stream)

    sp = sub.add_parser("delay-sim", help="Monte-Carlo delay-estimation experiment")
    sp.add_argument("--config", required=True, help="JSON config (schema 1)")
    sp.add_argument("--out", default="delay_sim.csv")
    sp.add_argument("--check", action="store_true",
                    help="exit 1 if the config's check block is violated")
    sp.set_defaults(func=cmd_delay_sim)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on bad args already
        raise
    try:
        args.func(args)
    except CommandError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    except (ValueError, ZeroDivisionError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
