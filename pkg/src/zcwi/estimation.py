"""Monte-Carlo time-delay estimation harness.

Every estimator here is two-stage.  A coarse stage locates the main lobe of
an envelope (complex cross-correlation envelope, or the complex crosslation
envelope built from the clean reference's zero crossings) and refines the
peak with a 3-point parabola.  A fine stage then solves the delay by
least squares on a fixed budget of received-sample reads:

* ``correlation_env`` reads the received waveform at equidistant times at
  the waveform's degrees-of-freedom rate, the sampling model behind the
  classical delay bound (one slope-squared Fisher term per sample);
* ``crosslation_env`` / ``slew_crosslation_env`` read it at the reference's
  zero-crossing times, where the expected squared slope is twice the
  unconditional one - slew-rate matching is exactly the Newton weighting by
  the local slopes, while the plain variant weights by polarity only.

Reads are raw samples (no interpolation smooths the noise), so the empirical
variances are directly comparable to the reported bounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import hilbert

from .crossings import detect_crossings
from .interferograms import weighted_event_average
from .reference import CRReport, butterworth_gain, cr_bounds, lorentzian_gain
from .signals import (
    BandLimited,
    Butterworth,
    GaussianShape,
    ModifiedLorentzian,
    Waveform,
    delay_and_corrupt,
    synth_gaussian,
)

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "EstimationReport",
    "trial_seeds",
    "run_trial",
    "run_experiment",
    "resolution_sweep",
    "empirical_woodward",
    "config_from_json",
    "config_to_json",
]

ESTIMATORS = ("correlation_env", "crosslation_env", "slew_crosslation_env")

_SPECTRUM_FAMILIES = {
    "band_limited": BandLimited,
    "gaussian_shape": GaussianShape,
    "butterworth": Butterworth,
    "modified_lorentzian": ModifiedLorentzian,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte-Carlo experiment: spectrum, geometry, noise, estimator, seeds."""

    spectrum: object
    duration: float
    dt: float
    true_delay: float
    snr_db: float
    trials: int
    estimator: str
    base_seed: int
    search_window: float = 0.0  # half-width of the coarse delay search; 0 = auto
    sample_budget: int = 0  # fine-stage reads; 0 = the waveform's degrees of freedom

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not abs(self.true_delay) < self.duration / 4:
            raise ValueError("|true_delay| must be < T/4")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    def resolved_search_window(self) -> float:
        if self.search_window > 0:
            return self.search_window
        return abs(self.true_delay) + 40.0 * self.dt

    def resolved_budget(self) -> int:
        if self.sample_budget > 0:
            return self.sample_budget
        from .reference import degrees_of_freedom

        return int(round(degrees_of_freedom(self.spectrum, self.duration).dof))


@dataclass(frozen=True)
class TrialResult:
    delta_hat: float
    peak_value: float
    n_c_used: int


@dataclass
class EstimationReport:
    bias: float
    variance: float
    rmse: float
    cr_bound: CRReport
    trials: int
    estimator: str
    n_c_mean: float
    dof: float
    variance_stderr: float

    def to_rows(self):
        return [
            ("bias", self.bias),
            ("variance", self.variance),
            ("rmse", self.rmse),
            ("variance_stderr", self.variance_stderr),
            ("cr_var_correlation", self.cr_bound.var_correlation),
            ("cr_var_crosslation", self.cr_bound.var_crosslation),
            ("cr_ratio", self.cr_bound.ratio),
            ("trials", float(self.trials)),
            ("n_c_mean", self.n_c_mean),
            ("dof", self.dof),
        ]


def trial_seeds(base_seed: int, trial_index: int, count: int = 2):
    """Independent child seeds via a counter-based splitter (Philox)."""
    bits = np.random.Philox(key=base_seed, counter=[0, 0, 0, trial_index])
    return np.random.Generator(bits).integers(0, 2**63 - 1, size=count)


def _parabolic_peak(values: np.ndarray, k: int, dt: float, lag0: float) -> float:
    """Sub-sample vertex of the parabola through the peak sample and neighbours."""
    if k == 0 or k == values.size - 1:
        return lag0 + k * dt
    ym, y0, yp = values[k - 1], values[k], values[k + 1]
    denom = ym - 2.0 * y0 + yp
    offset = 0.0 if denom == 0 else 0.5 * (ym - yp) / denom
    return lag0 + (k + offset) * dt


def _band_smooth(helix: np.ndarray, dt: float, band) -> np.ndarray:
    """Restrict a complex lag-domain helix to the one-sided signal band.

    The true helix spectrum is confined to the band, so zeroing everything
    else is a matched post-filter that strips broadband estimation noise.
    """
    lo, hi = band
    n = helix.size
    spec = np.fft.fft(helix)
    w = 2.0 * np.pi * np.fft.fftfreq(n, d=dt)
    spec[(w < lo * 0.8) | (w > hi * 1.2)] = 0.0
    return np.fft.ifft(spec)


def _signal_band(model) -> tuple:
    if isinstance(model, BandLimited):
        return (model.low, model.W)
    B = model.rms_bandwidth
    if math.isfinite(B):
        return (0.0, 4.0 * B)
    return (0.0, math.inf)


def run_trial(cfg: ExperimentConfig, trial_index: int) -> TrialResult:
    """Synthesize, delay+corrupt, estimate the delay with the configured estimator.

    Crossings and slew rates always come from the clean reference; the
    received waveform only supplies the sampled values (and the correlation
    channel), mirroring a delayed-reference detector driving sampler banks.
    """
    synth_seed, noise_seed = trial_seeds(cfg.base_seed, trial_index)
    ref = synth_gaussian(cfg.spectrum, cfg.n_samples, cfg.dt, int(synth_seed))
    received = delay_and_corrupt(ref, cfg.true_delay, cfg.snr_db, int(noise_seed))
    sw = cfg.resolved_search_window()
    if cfg.estimator == "correlation_env":
        return _correlation_env_trial(cfg, ref, received, sw)
    return _crosslation_env_trial(cfg, ref, received, sw)


def _gather_cubic(x: np.ndarray, pos: np.ndarray) -> np.ndarray:
    pos = np.clip(pos, 1.0, x.size - 2.0)
    idx = np.minimum(pos.astype(np.int64), x.size - 3)
    s = pos - idx
    ym, y0, y1, y2 = x[idx - 1], x[idx], x[idx + 1], x[idx + 2]
    a1 = (-2.0 * ym - 3.0 * y0 + 6.0 * y1 - y2) / 6.0
    a2 = (ym - 2.0 * y0 + y1) / 2.0
    a3 = (-ym + 3.0 * y0 - 3.0 * y1 + y2) / 6.0
    return y0 + s * (a1 + s * (a2 + s * a3))


def _fine_delay_fit(
    ref: Waveform,
    reads: np.ndarray,
    read_pos: np.ndarray,
    delta0: float,
    weighting: str = "matched",
    iterations: int = 12,
    step_tol: float = 1e-13,
) -> float:
    """Least-squares fit of reads = gain * x(read_pos - delta) + noise.

    ``reads`` are raw received samples at integer grid positions ``read_pos``
    (in samples); the model is the clean reference evaluated by cubic
    interpolation, with the unknown channel gain profiled out so the estimate
    is exactly invariant under received-amplitude scaling.  "matched" weights
    each residual by the local model slope (Newton-Gauss, which is slew-rate
    matching at crossing reads); "sign" uses the slope polarity only, the
    plain polarity-switched average.
    """
    x = ref.samples
    dx = np.gradient(x, ref.dt)
    delta = delta0
    for _ in range(iterations):
        p = read_pos - delta / ref.dt
        model = _gather_cubic(x, p)
        slope = _gather_cubic(dx, p)
        mm = float(np.dot(model, model))
        gain = float(np.dot(model, reads)) / mm if mm > 0 else 1.0
        resid = reads - gain * model
        if weighting == "matched":
            w = slope
        else:
            w = np.sign(slope)
        denom = gain * float(np.dot(w, slope))
        if denom == 0.0:
            break
        # d model / d delta = -gain * slope: LS step is -<w, resid>/denom
        step = float(np.dot(w, resid)) / denom
        delta = delta - step
        if abs(step) < step_tol * ref.dt:
            break
    return delta


def _correlation_env_trial(cfg, ref: Waveform, received: Waveform, sw: float) -> TrialResult:
    n = len(ref)
    za = hilbert(ref.samples)
    zr = hilbert(received.samples)
    corr = np.fft.ifft(np.conj(np.fft.fft(za)) * np.fft.fft(zr)) / n
    K = int(round(sw / cfg.dt))
    lags = np.concatenate([np.arange(n - K, n), np.arange(0, K + 1)])  # -K..K circular
    env = np.abs(corr[lags])
    k = int(np.argmax(env))
    coarse = _parabolic_peak(env, k, cfg.dt, -K * cfg.dt)
    # fine stage: equidistant reads at the degrees-of-freedom rate; the grid is
    # anchored to the coarse estimate so a shifted channel shifts the reads too
    budget = cfg.resolved_budget()
    margin_samp = int(math.ceil(max(received.guard, ref.guard) / cfg.dt)) + 2 * K + 2
    usable = n - 2 * margin_samp
    if usable < budget:
        raise ValueError("record too short for the configured sample budget")
    step = usable // budget
    read_pos = margin_samp + step * np.arange(budget) + int(round(coarse / cfg.dt))
    delta = _fine_delay_fit(ref, received.samples[read_pos], read_pos.astype(float), coarse)
    return TrialResult(delta, float(env[k]), n_c_used=0)


def _crosslation_env_trial(cfg, ref: Waveform, received: Waveform, sw: float) -> TrialResult:
    cs = detect_crossings(ref)
    if len(cs) == 0:
        raise ValueError("no crossings in the reference waveform")
    polarity = 1.0 - 2.0 * cs.psi.astype(np.float64)
    K = int(round(sw / cfg.dt))
    lags = np.arange(-K, K + 1, dtype=np.float64) * cfg.dt
    positions = cs.times / cfg.dt
    margin = max(received.guard, ref.guard) + 2.0 * cfg.dt
    lo = margin / cfg.dt
    hi = len(ref) - 1 - margin / cfg.dt
    keep = (positions - K >= lo) & (positions + K <= hi)
    if not keep.any():
        raise ValueError("search window too wide for the record")
    # coarse stage: complex crosslation envelope of the received pair
    zr = hilbert(received.samples)
    c_vals, _, _ = weighted_event_average(
        np.imag(zr), cfg.dt, positions[keep], polarity[keep], lags
    )
    a_vals, _, _ = weighted_event_average(
        np.real(zr), cfg.dt, positions[keep], polarity[keep], lags
    )
    helix = a_vals + 1j * c_vals
    band = _signal_band(cfg.spectrum)
    if math.isfinite(band[1]):
        helix = _band_smooth(helix, cfg.dt, band)
    env = np.abs(helix)
    k = int(np.argmax(env))
    coarse = _parabolic_peak(env, k, cfg.dt, float(lags[0]))
    # fine stage: reads at the crossing times (chronological budget); the read
    # positions are re-anchored on the refined estimate so the result does not
    # depend on the coarse stage's sub-sample details
    budget = min(cfg.resolved_budget(), int(keep.sum()))
    times = cs.times[keep][:budget]
    weighting = "matched" if cfg.estimator == "slew_crosslation_env" else "sign"
    delta = coarse
    for _ in range(2):
        read_pos = np.round((times + delta) / cfg.dt).astype(np.int64)
        read_pos = np.clip(read_pos, 2, len(ref) - 3)
        delta = _fine_delay_fit(
            ref, received.samples[read_pos], read_pos.astype(float), delta, weighting
        )
    return TrialResult(delta, float(env[k]), n_c_used=int(budget))


def _measured_spectral_stats(cfg: ExperimentConfig, n_refs: int = 16):
    """(dof, rms bandwidth) from the realized waveforms' averaged periodogram."""
    n = cfg.n_samples
    acc = None
    for i in range(n_refs):
        seed = int(trial_seeds(cfg.base_seed, i)[0])
        ref = synth_gaussian(cfg.spectrum, n, cfg.dt, seed)
        p = np.abs(np.fft.rfft(ref.samples)) ** 2
        acc = p if acc is None else acc + p
    acc /= n_refs
    w = 2.0 * np.pi * np.fft.rfftfreq(n, d=cfg.dt)
    B = math.sqrt(float(np.sum(w * w * acc) / np.sum(acc)))
    # periodogram bins are ~exponential, so E[mean^2] = S^2 (1 + 1/K): correct it
    mirror = acc[-2:0:-1] if n % 2 == 0 else acc[-1:0:-1]
    full = np.concatenate([acc, mirror])  # two-sided |X|^2
    r = np.fft.ifft(full).real / n  # circular autocorrelation estimate
    var0 = r[0]
    integral = np.sum(r**2) * cfg.dt / (1.0 + 1.0 / n_refs)
    dof = cfg.duration * var0**2 / integral
    return dof, B


def run_experiment(cfg: ExperimentConfig) -> EstimationReport:
    """Run all trials and aggregate; deterministic given the config."""
    dof, B = _measured_spectral_stats(cfg)
    if cfg.sample_budget == 0:
        # auto budget: the measured degrees of freedom, the m_s of the bounds
        from dataclasses import replace

        run_cfg = replace(cfg, sample_budget=int(round(dof)))
    else:
        run_cfg = cfg
    deltas = np.empty(cfg.trials)
    for i in range(cfg.trials):
        deltas[i] = run_trial(run_cfg, i).delta_hat
    bias = float(np.mean(deltas) - cfg.true_delay)
    variance = float(np.var(deltas, ddof=1)) if cfg.trials > 1 else 0.0
    rmse = math.sqrt(bias * bias + variance)
    # spread of the variance estimate itself (delta-method on the 4th moment)
    d = deltas - np.mean(deltas)
    m2 = float(np.mean(d**2))
    m4 = float(np.mean(d**4))
    var_se = math.sqrt(max(m4 - m2 * m2, 0.0) / cfg.trials)
    n_c_mean = _mean_crossings(cfg)
    signal_var = cfg.spectrum.variance if hasattr(cfg.spectrum, "variance") else 1.0
    noise_var = signal_var / (10.0 ** (cfg.snr_db / 10.0)) if math.isfinite(cfg.snr_db) else 0.0
    if noise_var > 0:
        bound = cr_bounds(noise_var, signal_var, B, dof, max(n_c_mean, 1.0))
    else:
        bound = CRReport(0.0, 0.0)
    return EstimationReport(
        bias=bias,
        variance=variance,
        rmse=rmse,
        cr_bound=bound,
        trials=cfg.trials,
        estimator=cfg.estimator,
        n_c_mean=n_c_mean,
        dof=dof,
        variance_stderr=var_se,
    )


def _mean_crossings(cfg: ExperimentConfig, n_refs: int = 8) -> float:
    counts = []
    for i in range(n_refs):
        seed = int(trial_seeds(cfg.base_seed, i)[0])
        ref = synth_gaussian(cfg.spectrum, cfg.n_samples, cfg.dt, seed)
        counts.append(len(detect_crossings(ref)))
    return float(np.mean(counts))


def empirical_woodward(env: np.ndarray, lags: np.ndarray) -> float:
    """Resolution constant of a measured envelope: int env^2 / env(peak)^2."""
    peak = float(np.max(np.abs(env)))
    if peak == 0:
        raise ValueError("flat envelope")
    return float(np.trapezoid((env / peak) ** 2, lags))


def empirical_gain(model, n: int = 2**18, dt: float | None = None, seed: int = 0,
                   half_window: float | None = None) -> float:
    """Resolution gain measured from simulated envelopes.

    Synthesizes one realization, measures the complex-correlation envelope and
    the complex-crosslation envelope over a lag window, and returns the ratio
    of their empirical resolution constants.
    """
    from .interferograms import empirical_autoference, empirical_crosslation
    from .signals import analytic_signal

    scale = getattr(model, "W", None) or getattr(model, "bandwidth")
    fine = model.rms_bandwidth
    if not math.isfinite(fine):
        fine = scale
    if dt is None:
        dt = 0.25 / max(scale, fine)
    if half_window is None:
        half_window = 40.0 / scale
    w = synth_gaussian(model, n, dt, seed)
    za = hilbert(w.samples)
    corr = np.fft.ifft(np.conj(np.fft.fft(za)) * np.fft.fft(za)) / n
    K = int(round(half_window / dt))
    corr_env = np.abs(np.concatenate([corr[-K:], corr[: K + 1]]))
    lags = np.arange(-K, K + 1) * dt
    dtau = empirical_woodward(corr_env, lags)
    pair = analytic_signal(w)
    cs = detect_crossings(pair.x)
    C = empirical_crosslation(pair.x, cs, half_window)
    A = empirical_autoference(pair, half_window)
    # debias the squared envelope by the per-lag estimation noise power, which
    # otherwise rectifies into the (long, weak) envelope tails
    env2 = A.values**2 + C.values**2 - A.stderr**2 - C.stderr**2
    xl_env = np.sqrt(np.maximum(env2, 0.0))
    dtau_c = empirical_woodward(xl_env, C.lags)
    return dtau / dtau_c


def resolution_sweep(family: str, params, empirical_at=(), n: int = 2**18, seed: int = 0) -> list:
    """Tabulate closed-form resolution gains over a parameter grid.

    Returns rows (parameter, gain, empirical_gain); the empirical column is
    NaN except at the ``empirical_at`` points, where a simulated-envelope
    measurement is attached.  Families: "butterworth" (kappa grid) and
    "lorentzian" (gamma grid).
    """
    if family == "butterworth":
        gain_fn = butterworth_gain
        make = lambda p: Butterworth(kappa=p, W=1.0)
    elif family == "lorentzian":
        gain_fn = lorentzian_gain
        make = lambda p: ModifiedLorentzian(gamma=p, W=1.0)
    else:
        raise ValueError(f"unknown family {family!r}")
    empirical_at = sorted(float(p) for p in empirical_at)
    rows = []
    for p in params:
        p = float(p)
        emp = math.nan
        if any(abs(p - q) < 1e-12 for q in empirical_at):
            emp = empirical_gain(make(p), n=n, seed=seed)
        rows.append((p, gain_fn(p), emp))
    return rows


# ---------------------------------------------------------------------------
# JSON config (schema 1)
# ---------------------------------------------------------------------------


def _spectrum_to_dict(model) -> dict:
    for name, cls in _SPECTRUM_FAMILIES.items():
        if isinstance(model, cls):
            out = {"family": name}
            out.update({k: getattr(model, k) for k in model.__dataclass_fields__})
            return out
    raise ValueError(f"unsupported spectrum {type(model).__name__}")


def _spectrum_from_dict(d: dict):
    d = dict(d)
    family = d.pop("family", None)
    if family not in _SPECTRUM_FAMILIES:
        raise ValueError(f"unknown spectrum family {family!r}")
    cls = _SPECTRUM_FAMILIES[family]
    allowed = set(cls.__dataclass_fields__)
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown spectrum keys {sorted(unknown)}")
    return cls(**d)


_CONFIG_KEYS = {
    "schema",
    "spectrum",
    "duration",
    "dt",
    "true_delay",
    "snr_db",
    "trials",
    "estimator",
    "base_seed",
    "search_window",
    "check",
}


def config_from_json(text: str) -> tuple:
    """Parse a schema-1 experiment config; returns (config, check_block)."""
    d = json.loads(text)
    if d.get("schema") != 1:
        raise ValueError("config must declare \"schema\": 1")
    unknown = set(d) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    snr = d["snr_db"]
    snr = math.inf if isinstance(snr, str) and snr.lower() in ("inf", "+inf") else float(snr)
    cfg = ExperimentConfig(
        spectrum=_spectrum_from_dict(d["spectrum"]),
        duration=float(d["duration"]),
        dt=float(d["dt"]),
        true_delay=float(d["true_delay"]),
        snr_db=snr,
        trials=int(d["trials"]),
        estimator=str(d["estimator"]),
        base_seed=int(d["base_seed"]),
        search_window=float(d.get("search_window", 0.0)),
    )
    return cfg, d.get("check", {})


def config_to_json(cfg: ExperimentConfig, check: dict | None = None) -> str:
    d = {
        "schema": 1,
        "spectrum": _spectrum_to_dict(cfg.spectrum),
        "duration": cfg.duration,
        "dt": cfg.dt,
        "true_delay": cfg.true_delay,
        "snr_db": "inf" if math.isinf(cfg.snr_db) else cfg.snr_db,
        "trials": cfg.trials,
        "estimator": cfg.estimator,
        "base_seed": cfg.base_seed,
        "search_window": cfg.search_window,
    }
    if check:
        d["check"] = check
    return json.dumps(d, indent=1)
