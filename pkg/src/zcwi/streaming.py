"""Event-driven crosslator operating in elapsed time.

An m-tap delay line holds the most recent samples; a two-tap detector between
taps (q_j, q_j+1) declares a zero crossing whenever those taps have opposite
signs, the crossing nominally located midway between them.  On each event all
tap values are folded, with the crossing polarity applied, into a bank of
per-tap averagers, so an empirical crosslation function builds up
incrementally while the waveform flows through the line.

Tap k leads the detector midpoint by (j + 1/2 - k) samples.  With the
detector at the old end of the line (j = m - 1) almost the whole window lies
in each crossing's future ("future in the past"); at the young end (j = 1)
it covers the past half only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interferograms import Interferogram

__all__ = ["StreamReport", "StreamingCrosslator"]

MODES = ("past_only", "future_in_the_past")


@dataclass
class StreamReport:
    """Snapshot of the averaging bank as a function of relative time."""

    interferogram: Interferogram
    events_processed: int
    mode: str


class StreamingCrosslator:
    """Delay line + two-tap detector + polarity switch + averaging bank.

    ``averaging`` is "fixed" (running mean over every event so far, with
    compensated summation) or "recursive" (geometrically forgetting mean with
    factor ``forgetting`` in (0, 1]; the factor 1 reproduces the running
    mean).  One writer per instance; snapshots return immutable copies.

    Exact-zero samples never fire the detector (strict opposite-sign rule);
    the batch detector's zero tie-break is a separate convention.
    """

    def __init__(
        self,
        m: int,
        dt: float,
        mode: str = "future_in_the_past",
        detector_index: int | None = None,
        averaging: str = "fixed",
        forgetting: float = 1.0,
    ):
        if m < 4:
            raise ValueError("delay line needs at least 4 taps")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if detector_index is None:
            detector_index = m - 1 if mode == "future_in_the_past" else 1
        if not 1 <= detector_index < m:
            raise ValueError("detector index must satisfy 1 <= j < m")
        if averaging not in ("fixed", "recursive"):
            raise ValueError("averaging must be 'fixed' or 'recursive'")
        if not 0.0 < forgetting <= 1.0:
            raise ValueError("forgetting factor must lie in (0, 1]")
        self.m = int(m)
        self.dt = float(dt)
        self.mode = mode
        self.j = int(detector_index)
        self.averaging = averaging
        self.forgetting = float(forgetting)
        self._buf = np.zeros(self.m)
        self._pushed = 0
        self._tap_offsets = np.arange(self.m)  # q_k holds the sample pushed k-1 steps ago
        self._sum = np.zeros(self.m)
        self._comp = np.zeros(self.m)  # compensated-summation carry
        self._sumsq = np.zeros(self.m)
        self._acc = np.zeros(self.m)
        self._weight = 0.0
        self.event_count = 0
        self._last_event_time = -np.inf
        # relative time of tap k = 1..m w.r.t. the detector midpoint (descending)
        self._lags = (self.j + 0.5 - np.arange(1, self.m + 1)) * self.dt

    def push_sample(self, value: float):
        """Advance the line by one sample.

        Returns (event_time, psi) when the detector pair changed sign, else
        None.  Event times are the chronological midpoints of the bracketing
        samples and strictly increase.
        """
        i = self._pushed
        self._buf[i % self.m] = value
        self._pushed += 1
        if self._pushed < self.m:
            return None
        older = self._buf[(i - self.j) % self.m]
        newer = self._buf[(i - self.j + 1) % self.m]
        if not older * newer < 0.0:
            return None
        psi = 0 if newer > 0.0 else 1
        polarity = 1.0 - 2.0 * psi
        taps = polarity * self._buf[(i - self._tap_offsets) % self.m]
        # Kahan update keeps the fixed-window mean bit-stable over long runs
        y = taps - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t
        self._sumsq += taps * taps
        self._weight = 1.0 + self.forgetting * self._weight
        self._acc += (taps - self._acc) / self._weight
        self.event_count += 1
        event_time = (i - self.j + 0.5) * self.dt
        assert event_time > self._last_event_time
        self._last_event_time = event_time
        return event_time, psi

    def feed(self, values) -> list:
        """Push a block of samples; returns the events fired."""
        events = []
        for v in np.asarray(values, dtype=np.float64):
            ev = self.push_sample(float(v))
            if ev is not None:
                events.append(ev)
        return events

    def snapshot(self) -> StreamReport:
        """Current averages, index-reversed onto an ascending relative-time grid."""
        if self.event_count == 0:
            empty = Interferogram(np.empty(0), np.empty(0), 0, "crosslation")
            return StreamReport(empty, 0, self.mode)
        if self.averaging == "fixed":
            mean = self._sum / self.event_count
        else:
            mean = self._acc.copy()
        n = self.event_count
        if n > 1:
            var = np.maximum(self._sumsq / n - (self._sum / n) ** 2, 0.0) * n / (n - 1)
            stderr = np.sqrt(var / n)
        else:
            stderr = np.full(self.m, np.nan)
        ig = Interferogram(
            self._lags[::-1].copy(), mean[::-1].copy(), n, "crosslation", stderr[::-1].copy()
        )
        return StreamReport(ig, n, self.mode)
