"""Zero-crossing detection with sub-sample timing, direction and slew rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import Waveform

__all__ = [
    "CrossingEvent",
    "CrossingSet",
    "detect_crossings",
    "slope_at",
    "sign_train",
    "refine_events",
]

UP = 0
DOWN = 1


@dataclass(frozen=True)
class CrossingEvent:
    """One zero crossing: interpolated time, direction flag, local slew rate."""

    time: float
    psi: int  # 0 = upcrossing, 1 = downcrossing
    slope: float  # volts/second, signed
    index: int  # sample index of the bracketing pair (k, k+1)


@dataclass
class CrossingSet:
    """Ordered zero crossings of one waveform (struct-of-arrays)."""

    times: np.ndarray
    psi: np.ndarray
    slopes: np.ndarray
    indices: np.ndarray
    duration: float
    dt: float
    guard: float = 0.0
    n_samples: int = 0

    def __len__(self) -> int:
        return self.times.size

    def __iter__(self):
        for t, p, s, i in zip(self.times, self.psi, self.slopes, self.indices):
            yield CrossingEvent(float(t), int(p), float(s), int(i))

    def __getitem__(self, i: int) -> CrossingEvent:
        return CrossingEvent(
            float(self.times[i]), int(self.psi[i]), float(self.slopes[i]), int(self.indices[i])
        )

    @property
    def n_plus(self) -> int:
        return int(np.count_nonzero(self.psi == UP))

    @property
    def n_minus(self) -> int:
        return int(np.count_nonzero(self.psi == DOWN))

    @property
    def rate(self) -> float:
        """Observed crossings per second."""
        return len(self) / self.duration if self.duration > 0 else 0.0

    def subset(self, mask: np.ndarray) -> "CrossingSet":
        return CrossingSet(
            self.times[mask],
            self.psi[mask],
            self.slopes[mask],
            self.indices[mask],
            self.duration,
            self.dt,
            self.guard,
            self.n_samples,
        )

    def to_csv(self, path) -> None:
        from .io import write_csv

        rows = np.column_stack([self.times, self.psi.astype(float), self.slopes])
        write_csv(path, ("t", "psi", "slope"), rows)


def _resolved_signs(x: np.ndarray) -> np.ndarray:
    """Sample signs with exact zeros grouped with the following sample's sign.

    Trailing zeros stay 0 and never produce an event; a run of zeros collapses
    onto the sign of the first nonzero sample after it, so consecutive exact
    zeros yield no event between themselves.
    """
    s = np.sign(x).astype(np.int8)
    zeros = s == 0
    if zeros.any():
        idx = np.arange(x.size)
        nz_after = np.full(x.size, x.size, dtype=np.int64)
        nz = idx[~zeros]
        if nz.size:
            pos = np.searchsorted(nz, idx, side="left")
            valid = pos < nz.size
            nz_after[valid] = nz[pos[valid]]
        take = zeros & (nz_after < x.size)
        s[take] = s[nz_after[take]]
    return s


def detect_crossings(w: Waveform, hysteresis: float = 0.0) -> CrossingSet:
    """One event per sign change between adjacent samples.

    The waveform must already be zero-mean (synthesis guarantees it here; this
    function never demeans).  Crossing times come from linear inverse
    interpolation of the bracketing pair; slopes from the same pair.  With
    ``hysteresis`` > 0, a crossing only counts once the waveform has left the
    band |x| <= hysteresis on the far side, which suppresses chatter on noisy
    inputs (default 0: every sign change counts).
    """
    x = w.samples
    if hysteresis < 0:
        raise ValueError("hysteresis must be >= 0")
    if hysteresis == 0.0:
        s = _resolved_signs(x)
        change = s[:-1] * s[1:] < 0
        k = np.nonzero(change)[0]
    else:
        state = np.zeros(x.size, dtype=np.int8)
        state[x > hysteresis] = 1
        state[x < -hysteresis] = -1
        # carry the last confirmed state through the dead band
        filled = state.copy()
        last = 0
        for i in range(x.size):  # pragma: no branch - simple scan
            if filled[i] == 0:
                filled[i] = last
            else:
                last = filled[i]
        change = (filled[:-1] * filled[1:] < 0) & (filled[:-1] != 0)
        conf = np.nonzero(change)[0]
        # locate each event at the raw sign change closest before confirmation
        s = _resolved_signs(x)
        raw = np.nonzero(s[:-1] * s[1:] < 0)[0]
        k = np.array(
            [raw[raw <= c][-1] for c in conf if raw[raw <= c].size], dtype=np.int64
        )
        k = np.unique(k)
    if k.size == 0:
        return CrossingSet(
            np.empty(0),
            np.empty(0, dtype=np.int8),
            np.empty(0),
            np.empty(0, dtype=np.int64),
            w.duration,
            w.dt,
            w.guard,
            len(w),
        )
    x0 = x[k]
    x1 = x[k + 1]
    frac = x0 / (x0 - x1)
    times = (k + frac) * w.dt
    slopes = (x1 - x0) / w.dt
    psi = np.where(slopes > 0, UP, DOWN).astype(np.int8)
    return CrossingSet(times, psi, slopes, k, w.duration, w.dt, w.guard, len(w))


def slope_at(w: Waveform, event: CrossingEvent) -> float:
    """Signed slew rate at the event, from the bracketing two-sample difference."""
    lo, hi = w.trusted_interval()
    if not (lo <= event.time <= hi):
        raise ValueError(f"event at t={event.time:g}s lies in the untrusted edge zone")
    k = event.index
    return float((w.samples[k + 1] - w.samples[k]) / w.dt)


def refine_events(w: Waveform, cs: CrossingSet, iterations: int = 3):
    """Higher-order crossing times and slew rates from a local cubic fit.

    Fits the cubic through the four samples around each bracketing pair and
    polishes the root by Newton iteration, which removes the O(dt^2) chord
    bias of the two-tap convention.  Events too close to the record ends keep
    their two-tap values.  Returns (times, slopes).
    """
    x = w.samples
    k = cs.indices
    times = cs.times.copy()
    slopes = cs.slopes.copy()
    ok = (k >= 1) & (k + 2 <= x.size - 1)
    if not ok.any():
        return times, slopes
    ym = x[k[ok] - 1]
    y0 = x[k[ok]]
    y1 = x[k[ok] + 1]
    y2 = x[k[ok] + 2]
    a0 = y0
    a1 = (-2.0 * ym - 3.0 * y0 + 6.0 * y1 - y2) / 6.0
    a2 = (ym - 2.0 * y0 + y1) / 2.0
    a3 = (-ym + 3.0 * y0 - 3.0 * y1 + y2) / 6.0
    s = times[ok] / w.dt - k[ok]  # start from the chord root
    for _ in range(iterations):
        p = a0 + s * (a1 + s * (a2 + s * a3))
        dp = a1 + s * (2.0 * a2 + 3.0 * s * a3)
        step = np.where(dp != 0.0, p / np.where(dp == 0.0, 1.0, dp), 0.0)
        s = np.clip(s - step, 0.0, 1.0)
    dp = a1 + s * (2.0 * a2 + 3.0 * s * a3)
    good = np.sign(dp) == np.sign(slopes[ok])  # keep convention when the fit misbehaves
    times_ok = (k[ok] + s) * w.dt
    slopes_ok = dp / w.dt
    times[np.nonzero(ok)[0][good]] = times_ok[good]
    slopes[np.nonzero(ok)[0][good]] = slopes_ok[good]
    return times, slopes


def sign_train(w: Waveform):
    """Event train d(t): impulse weight (-1)^psi at each crossing time.

    Returns (times, polarities).  Scatter onto the sample grid (for the
    convolution route to the crosslation function) is provided by
    ``grid_train``.
    """
    cs = detect_crossings(w)
    polarity = 1.0 - 2.0 * cs.psi.astype(np.float64)
    return cs.times.copy(), polarity


def grid_train(cs: CrossingSet, n: int) -> np.ndarray:
    """Scatter the bipolar event train onto the sample grid.

    Each sub-sample impulse at t = (k + f) dt splits linearly over samples k
    and k+1, so correlating the train with the waveform reproduces the
    linear-interpolation crosslation sum exactly.
    """
    train = np.zeros(n)
    polarity = 1.0 - 2.0 * cs.psi.astype(np.float64)
    frac = cs.times / cs.dt - cs.indices
    np.add.at(train, cs.indices, polarity * (1.0 - frac))
    np.add.at(train, cs.indices + 1, polarity * frac)
    return train
