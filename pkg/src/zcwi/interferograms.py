"""Empirical zero-crossing interferograms.

All estimators here are event averages: a waveform is sampled (with linear
interpolation) at crossing times shifted by every lag of a grid, weighted per
variant, and averaged over the events whose full lag window lies inside the
trusted part of the record.  Per-lag standard errors are the sample standard
deviation of the contributions divided by sqrt(n_used); "matches analytic
form" tests downstream are z-tests against those bars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from .crossings import CrossingSet, detect_crossings, grid_train
from .signals import AnalyticPair, Waveform

__all__ = [
    "Interferogram",
    "ComplexCrosslation",
    "BAND_RATIO_LIMIT",
    "lag_grid",
    "extract_crossjectories",
    "empirical_crosslation",
    "empirical_up",
    "empirical_down",
    "empirical_autoference",
    "weighted_autoference",
    "slew_matched",
    "local_structure",
    "decimate_by_slew",
    "complex_crosslation",
    "crosslation_by_convolution",
    "autoference_from_crosslation",
    "conditioned_residual_variance",
    "spectrum_from_crosslation",
    "estimate_mu",
    "filterbank_interferogram",
]

# largest band-edge ratio for which zero crossings of uniform bandpass noise
# still supply the full number of degrees of freedom
BAND_RATIO_LIMIT = (7.0 + math.sqrt(33.0)) / 4.0

_CHUNK = 4096


@dataclass
class Interferogram:
    """Values over a symmetric lag grid, tagged by estimator variant."""

    lags: np.ndarray
    values: np.ndarray
    n_used: int
    variant: str
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if self.lags.shape != self.values.shape:
            raise ValueError("lags and values must have the same shape")

    def value_at_zero(self) -> float:
        k = int(np.argmin(np.abs(self.lags)))
        return float(self.values[k])

    def to_csv(self, path) -> None:
        from .io import write_csv

        err = self.stderr if self.stderr is not None else np.zeros_like(self.values)
        write_csv(path, ("tau", "value", "stderr"), np.column_stack([self.lags, self.values, err]))


@dataclass
class ComplexCrosslation:
    """Paired even/odd components A + jC with envelope and Nyquist trace."""

    A: Interferogram
    C: Interferogram

    def __post_init__(self):
        if not np.array_equal(self.A.lags, self.C.lags):
            raise ValueError("A and C must share the lag grid")

    @property
    def lags(self) -> np.ndarray:
        return self.A.lags

    @property
    def envelope(self) -> np.ndarray:
        return np.hypot(self.A.values, self.C.values)

    @property
    def nyquist(self) -> np.ndarray:
        """Parametric (A, C) trace, one row per lag."""
        return np.column_stack([self.A.values, self.C.values])

    def rotated(self, angle: float) -> "ComplexCrosslation":
        """Fixed quadrature rotation of the (A, C) pair; envelope-invariant."""
        c, s = math.cos(angle), math.sin(angle)
        a = c * self.A.values - s * self.C.values
        b = s * self.A.values + c * self.C.values
        return ComplexCrosslation(
            Interferogram(self.A.lags, a, self.A.n_used, self.A.variant),
            Interferogram(self.C.lags, b, self.C.n_used, self.C.variant),
        )

    def to_csv(self, path) -> None:
        from .io import write_csv

        write_csv(
            path,
            ("tau", "A", "C", "envelope"),
            np.column_stack([self.lags, self.A.values, self.C.values, self.envelope]),
        )

    def nyquist_csv(self, path) -> None:
        from .io import write_csv

        write_csv(path, ("A", "C"), self.nyquist)


def lag_grid(half_window: float, dt: float) -> np.ndarray:
    """Symmetric grid of integer multiples of dt including tau = 0 exactly."""
    L = int(math.floor(half_window / dt + 1e-9))
    if L < 1:
        raise ValueError("half_window shorter than one sample interval")
    return np.arange(-L, L + 1, dtype=np.float64) * dt


def _event_positions(cs: CrossingSet, timing: str) -> np.ndarray:
    """Crossing positions in samples under the requested timing convention."""
    if timing == "interpolated":
        return cs.times / cs.dt
    if timing == "midpoint":
        return cs.indices.astype(np.float64) + 0.5
    raise ValueError(f"unknown timing convention {timing!r}")


def _eligible(positions: np.ndarray, cs: CrossingSet, lags: np.ndarray, guard: float) -> np.ndarray:
    lo = max(guard, cs.guard) / cs.dt
    hi = (cs.n_samples - 1) - max(guard, cs.guard) / cs.dt
    lag_lo = lags.min() / cs.dt
    lag_hi = lags.max() / cs.dt
    return (positions + lag_lo >= lo) & (positions + lag_hi <= hi)


def _gather(x: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Linear-interpolation gather of x at fractional sample positions."""
    pos = np.clip(pos, 0.0, x.size - 1.0)
    idx = np.minimum(pos.astype(np.int64), x.size - 2)
    frac = pos - idx
    return x[idx] * (1.0 - frac) + x[idx + 1] * frac


def _gather_cubic(x: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Cubic-interpolation gather (4-point stencil); positions must keep one
    sample of margin at both ends."""
    pos = np.clip(pos, 1.0, x.size - 2.0)
    idx = np.minimum(pos.astype(np.int64), x.size - 3)
    s = pos - idx
    ym, y0, y1, y2 = x[idx - 1], x[idx], x[idx + 1], x[idx + 2]
    a1 = (-2.0 * ym - 3.0 * y0 + 6.0 * y1 - y2) / 6.0
    a2 = (ym - 2.0 * y0 + y1) / 2.0
    a3 = (-ym + 3.0 * y0 - 3.0 * y1 + y2) / 6.0
    return y0 + s * (a1 + s * (a2 + s * a3))


def weighted_event_average(
    x: np.ndarray,
    dt: float,
    positions: np.ndarray,
    weights: np.ndarray,
    lags: np.ndarray,
    transform=None,
):
    """Mean and stderr of w_i * x(t_i + tau) per lag, chunked over events.

    ``positions`` are event locations in samples.  ``transform``, if given,
    is applied to the interpolated waveform values before weighting (the
    interpolation always happens on the raw samples so that e.g. squared
    statistics vanish exactly at the crossing).  Returns (mean, stderr, n).
    """
    n = positions.size
    if n == 0:
        raise ValueError("no usable crossings")
    lag_samples = lags / dt
    acc = np.zeros(lags.size)
    acc2 = np.zeros(lags.size)
    for start in range(0, n, _CHUNK):
        p = positions[start : start + _CHUNK, None] + lag_samples[None, :]
        vals = _gather(x, p)
        if transform is not None:
            vals = transform(vals)
        vals = vals * weights[start : start + _CHUNK, None]
        acc += vals.sum(axis=0)
        acc2 += (vals * vals).sum(axis=0)
    mean = acc / n
    if n > 1:
        var = np.maximum(acc2 / n - mean * mean, 0.0) * n / (n - 1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.full(lags.size, np.nan)
    return mean, stderr, n


def _prepare(w: Waveform, cs: CrossingSet, half_window, lags, timing: str):
    if lags is None:
        lags = lag_grid(half_window, w.dt)
        if half_window > w.duration / 4:
            raise ValueError("half_window must be <= T/4")
    positions = _event_positions(cs, timing)
    keep = _eligible(positions, cs, lags, w.guard)
    return lags, positions[keep], keep


def extract_crossjectories(
    w: Waveform,
    cs: CrossingSet,
    half_window: float,
    timing: str = "interpolated",
):
    """Matrix of aligned waveform segments, one row per usable crossing.

    Row i is x(t_i + tau) on the lag grid; returns (lags, matrix, mask) where
    ``mask`` marks which events of ``cs`` were usable.
    """
    lags, positions, keep = _prepare(w, cs, half_window, None, timing)
    if positions.size == 0:
        raise ValueError("no usable crossings")
    rows = np.empty((positions.size, lags.size))
    lag_samples = lags / w.dt
    for start in range(0, positions.size, _CHUNK):
        p = positions[start : start + _CHUNK, None] + lag_samples[None, :]
        rows[start : start + p.shape[0]] = _gather(w.samples, p)
    return lags, rows, keep


def _interferogram(
    w: Waveform,
    cs: CrossingSet,
    half_window,
    weights: np.ndarray,
    variant: str,
    lags=None,
    timing: str = "interpolated",
    select: np.ndarray | None = None,
) -> Interferogram:
    lags, positions, keep = _prepare(w, cs, half_window, lags, timing)
    if select is not None:
        positions = positions[select[keep]]
        weights = weights[keep][select[keep]]
    else:
        weights = weights[keep]
    if positions.size == 0:
        raise ValueError("no usable crossings")
    mean, stderr, n = weighted_event_average(w.samples, w.dt, positions, weights, lags)
    return Interferogram(lags, mean, n, variant, stderr)


def _polarity(cs: CrossingSet) -> np.ndarray:
    return 1.0 - 2.0 * cs.psi.astype(np.float64)


def empirical_crosslation(
    w: Waveform,
    cs: CrossingSet,
    half_window: float,
    lags=None,
    timing: str = "interpolated",
) -> Interferogram:
    """Sign-weighted average of all crossjectories: (1/n) sum (-1)^psi x(t_i + tau)."""
    return _interferogram(w, cs, half_window, _polarity(cs), "crosslation", lags, timing)


def empirical_up(w: Waveform, cs: CrossingSet, half_window: float) -> Interferogram:
    """Average over upcrossing crossjectories only."""
    sel = cs.psi == 0
    if not sel.any():
        raise ValueError("no upcrossings")
    return _interferogram(
        w, cs, half_window, np.ones(len(cs)), "up_only", select=sel
    )


def empirical_down(w: Waveform, cs: CrossingSet, half_window: float) -> Interferogram:
    """Average over downcrossing crossjectories only."""
    sel = cs.psi == 1
    if not sel.any():
        raise ValueError("no downcrossings")
    return _interferogram(
        w, cs, half_window, np.ones(len(cs)), "down_only", select=sel
    )


def empirical_autoference(pair: AnalyticPair, half_window: float) -> Interferogram:
    """Sign-weighted average of quadrature values at crossings of the Hilbert image.

    Crossings are detected on pair.x (= H{y}); the averaged values come from
    pair.y, which realizes the inverse-Hilbert route event by event.
    """
    cs = detect_crossings(pair.x)
    ig = _interferogram(pair.y, cs, half_window, _polarity(cs), "autoference")
    return ig


def weighted_autoference(pair: AnalyticPair, half_window: float) -> Interferogram:
    """Average of y(t_i) y(t_i + tau) over crossings of the Hilbert image."""
    cs = detect_crossings(pair.x)
    w0 = _gather(pair.y.samples, cs.times / pair.y.dt)
    return _interferogram(pair.y, cs, half_window, w0, "weighted_autoference")


def slew_matched(source, cs: CrossingSet, half_window: float) -> Interferogram:
    """Crosslation/autoference with signed slew-rate weights instead of (-1)^psi.

    Pass a Waveform for the slew-weighted crosslation of that waveform, or an
    AnalyticPair for the slew-weighted autoference (values from pair.y).  The
    slopes always come from ``cs``.
    """
    if isinstance(source, AnalyticPair):
        return _interferogram(
            source.y, cs, half_window, cs.slopes.astype(np.float64), "slew_autoference"
        )
    return _interferogram(
        source, cs, half_window, cs.slopes.astype(np.float64), "slew_crosslation"
    )


def local_structure(w: Waveform, cs: CrossingSet, half_window: float) -> Interferogram:
    """Mean of squared crossjectory values: the empirical local structure function.

    Values are interpolated before squaring, so the tau = 0 bin vanishes by
    construction (the crossing is a root of the interpolant).
    """
    lags, positions, _ = _prepare(w, cs, half_window, None, "interpolated")
    if positions.size == 0:
        raise ValueError("no usable crossings")
    mean, stderr, n = weighted_event_average(
        w.samples, w.dt, positions, np.ones(positions.size), lags, transform=np.square
    )
    return Interferogram(lags, mean, n, "local_structure", stderr)


def decimate_by_slew(cs: CrossingSet, target_count: int, method: str = "trim") -> CrossingSet:
    """Keep only the steepest crossings.

    ``trim`` keeps exactly the ``target_count`` events of largest |slope|
    (deterministic).  ``threshold`` keeps every event with |slope| above the
    Rayleigh quantile that retains ``target_count`` on average, the slope
    scale being estimated from the data.
    """
    if target_count <= 0:
        raise ValueError("target_count must be positive")
    n = len(cs)
    if target_count >= n:
        return cs.subset(np.ones(n, dtype=bool))
    mag = np.abs(cs.slopes)
    if method == "trim":
        order = np.argsort(mag, kind="stable")
        keep = np.zeros(n, dtype=bool)
        keep[order[n - target_count :]] = True
    elif method == "threshold":
        # Rayleigh tail: P(|slope| > eta) = exp(-eta^2 / (2 s^2)), E{U^2} = 2 s^2
        s2 = float(np.mean(mag**2)) / 2.0
        p = target_count / n
        eta = math.sqrt(-2.0 * s2 * math.log(p))
        keep = mag > eta
    else:
        raise ValueError(f"unknown decimation method {method!r}")
    return cs.subset(keep)


def complex_crosslation(C: Interferogram, A: Interferogram) -> ComplexCrosslation:
    """Package odd/even components into a complex crosslation function."""
    return ComplexCrosslation(A=A, C=C)


def crosslation_by_convolution(w: Waveform, cs: CrossingSet, half_window: float) -> Interferogram:
    """Crosslation via the bipolar event train route.

    Scatters the sign train onto the sample grid (two-tap linear split of each
    sub-sample impulse) and FFT-correlates it with the waveform.  This is the
    time-reversed-train convolution form of the estimator, computed along a
    completely different path than the direct event average.
    """
    from scipy.signal import correlate

    lags = lag_grid(half_window, w.dt)
    positions = _event_positions(cs, "interpolated")
    keep = _eligible(positions, cs, lags, w.guard)
    sub = cs.subset(keep)
    if len(sub) == 0:
        raise ValueError("no usable crossings")
    train = grid_train(sub, len(w))
    n = len(w)
    L = (lags.size - 1) // 2
    # full correlation c[m] = sum_k x[m - (n-1) + k] train[k]; lag p sits at m = p + n - 1
    c = correlate(w.samples, train, mode="full", method="fft")
    out = c[n - 1 - L : n + L] / len(sub)
    return Interferogram(lags, out, len(sub), "crosslation")


def autoference_from_crosslation(C: Interferogram) -> Interferogram:
    """Inverse Hilbert transform of a crosslation function over its lag window.

    The dual route to the event-by-event autoference average; agreement is
    limited by the finite lag window, so comparisons should stay on the
    interior of the grid.
    """
    a = -np.imag(hilbert(C.values))
    return Interferogram(C.lags, a, C.n_used, "autoference")


def conditioned_residual_variance(
    w: Waveform,
    cs: CrossingSet,
    half_window: float,
    template,
):
    """Per-lag variance of crossjectories after removing the slope-scaled template.

    ``template(tau)`` must be the unit-slope conditional-mean shape
    (-R'(tau) / (B^2 sigma^2) for a Gaussian process); the residual
    (-1)^psi x(t_i + tau) - |slope_i| template(tau) then carries only the
    nonstationary self-noise of the conditioned process.  Crossing times and
    slopes are re-measured with the cubic refinement so the chord bias of the
    two-tap convention does not leak into the small-lag variance.  Returns
    (lags, variance, stderr_of_variance, n).
    """
    from .crossings import refine_events

    times, slopes = refine_events(w, cs)
    lags = lag_grid(half_window, w.dt)
    positions = times / w.dt
    keep = _eligible(positions, cs, lags, w.guard + w.dt)  # cubic stencil margin
    positions = positions[keep]
    if positions.size == 0:
        raise ValueError("no usable crossings")
    rows = np.empty((positions.size, lags.size))
    lag_samples = lags / w.dt
    for start in range(0, positions.size, _CHUNK):
        p = positions[start : start + _CHUNK, None] + lag_samples[None, :]
        rows[start : start + p.shape[0]] = _gather_cubic(w.samples, p)
    rows *= _polarity(cs)[keep][:, None]
    resid = rows - np.abs(slopes[keep])[:, None] * np.asarray(template(lags))[None, :]
    n = resid.shape[0]
    mean = resid.mean(axis=0)
    d = resid - mean
    m2 = np.mean(d**2, axis=0)
    m4 = np.mean(d**4, axis=0)
    var = m2 * n / (n - 1)
    se = np.sqrt(np.maximum(m4 - m2**2, 0.0) / n)
    return lags, var, se, n


def estimate_mu(w: Waveform) -> float:
    """Hard-limiter proportionality constant mu = E|x| / var(x) from the data."""
    v = float(np.var(w.samples))
    if v == 0:
        raise ValueError("constant waveform")
    return float(np.mean(np.abs(w.samples))) / v


def spectrum_from_crosslation(
    C: Interferogram,
    mu: float,
    n0: float,
    omegas: np.ndarray | None = None,
):
    """One-sided spectral density from a crosslation function of a separable process.

    Uses the odd part of C on positive lags: S(w) = (4 n0 / (mu w)) * dt *
    sum_p C(tau_p) sin(w tau_p).  The w = 0 bin is excluded (the transform
    divides by w).  Returns (omegas, density).
    """
    if mu <= 0 or n0 <= 0:
        raise ValueError("mu and n0 must be positive")
    lags = C.lags
    k0 = int(np.argmin(np.abs(lags)))
    if abs(lags[k0]) > 1e-12:
        raise ValueError("lag grid must contain tau = 0")
    P = min(k0, lags.size - 1 - k0)
    dt = float(lags[k0 + 1] - lags[k0])
    tau = lags[k0 + 1 : k0 + P + 1]
    codd = 0.5 * (C.values[k0 + 1 : k0 + P + 1] - C.values[k0 - P : k0][::-1])
    if omegas is None:
        omegas = np.arange(1, P + 1) * (np.pi / (P * dt))
    omegas = np.asarray(omegas, dtype=np.float64)
    if np.any(omegas <= 0):
        raise ValueError("omega grid must be strictly positive")
    kernel = np.sin(omegas[:, None] * tau[None, :])
    density = (4.0 * n0 / (mu * omegas)) * dt * (kernel @ codd)
    return omegas, density


def bandpass_filter(w: Waveform, low: float, high: float) -> Waveform:
    """Brick-wall bandpass (rad/s edges) via the FFT; circular, so guard grows."""
    n = len(w)
    spec = np.fft.rfft(w.samples)
    wgrid = 2.0 * np.pi * np.fft.rfftfreq(n, d=w.dt)
    spec[(wgrid < low) | (wgrid > high)] = 0.0
    guard = max(w.guard, 10.0 * 2.0 * np.pi / max(high - low, 1e-300) , 0.02 * w.duration)
    return Waveform(np.fft.irfft(spec, n=n), w.dt, label=f"{w.label} [{low:g},{high:g}]", guard=guard)


def filterbank_interferogram(
    w: Waveform,
    bands,
    half_window: float,
) -> Interferogram:
    """Interferogram of a wideband waveform via a bank of bandpass filters.

    Each (low, high) band (rad/s) must satisfy high/low <= (7 + sqrt(33))/4 so
    the band's zero crossings supply its full degrees of freedom; per-band
    crosslation functions are combined by an event-count-weighted mean.
    """
    bands = [(float(lo), float(hi)) for lo, hi in bands]
    for lo, hi in bands:
        if not (0 < lo < hi):
            raise ValueError(f"band edges must satisfy 0 < low < high, got ({lo}, {hi})")
        if hi / lo > BAND_RATIO_LIMIT * (1 + 1e-12):
            raise ValueError(
                f"band ratio {hi / lo:.3f} exceeds (7+sqrt(33))/4 = {BAND_RATIO_LIMIT:.3f}; "
                "zero crossings would underdetermine the band"
            )
    total = None
    n_total = 0
    lags = None
    for lo, hi in bands:
        wb = bandpass_filter(w, lo, hi)
        cs = detect_crossings(wb)
        ig = empirical_crosslation(wb, cs, half_window)
        if total is None:
            lags = ig.lags
            total = ig.n_used * ig.values
        else:
            total += ig.n_used * ig.values
        n_total += ig.n_used
    if n_total == 0:
        raise ValueError("no usable crossings in any band")
    return Interferogram(lags, total / n_total, n_total, "crosslation")
