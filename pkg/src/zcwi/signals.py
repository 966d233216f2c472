"""Test-waveform synthesis with prescribed power spectra.

Random waveforms are generated by frequency-domain amplitude shaping of
complex white noise, so the seed-ensemble-averaged periodogram matches the
target two-sided density S(w) (rad/s convention, variance = (1/2pi) int S dw).
Deterministic for a fixed (model, n, dt, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

__all__ = [
    "Waveform",
    "BandLimited",
    "GaussianShape",
    "Butterworth",
    "ModifiedLorentzian",
    "MultiSine",
    "FMCarrier",
    "AnalyticPair",
    "synth_gaussian",
    "synth_multisine",
    "synth_fm_carrier",
    "analytic_signal",
    "delay_and_corrupt",
]

# fraction of the record treated as untrusted after a full-record Hilbert pass
HILBERT_EDGE_FRACTION = 0.02


@dataclass
class Waveform:
    """Uniformly sampled real-valued signal.

    ``guard`` marks a margin (seconds) at both ends whose samples are not
    trusted by statistics downstream (circular wrap-around of a fractional
    delay, Hilbert-transform edge ringing, ...).
    """

    samples: np.ndarray
    dt: float
    label: str = ""
    guard: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("waveform needs a non-empty 1-d sample array")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"sample interval must be finite and positive, got {self.dt}")
        if self.guard < 0:
            raise ValueError("guard must be >= 0")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Observation interval T = (n-1)*dt."""
        return (self.samples.size - 1) * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt

    def trusted_interval(self) -> tuple[float, float]:
        """(t_lo, t_hi) outside of which samples are untrusted."""
        return self.guard, self.duration - self.guard


@dataclass(frozen=True)
class BandLimited:
    """Uniform two-sided spectrum on low < |w| < W (rad/s); low = 0 is low-pass."""

    W: float
    variance: float = 1.0
    low: float = 0.0

    def __post_init__(self):
        if not (self.W > 0 and 0.0 <= self.low < self.W):
            raise ValueError("need 0 <= low < W")
        if self.variance <= 0:
            raise ValueError("variance must be positive")

    def density(self, w):
        w = np.abs(np.asarray(w, dtype=np.float64))
        level = self.variance * np.pi / (self.W - self.low)
        return np.where((w >= self.low) & (w <= self.W), level, 0.0)

    @property
    def rms_bandwidth(self) -> float:
        return math.sqrt((self.W**3 - self.low**3) / (3.0 * (self.W - self.low)))


@dataclass(frozen=True)
class GaussianShape:
    """Gaussian-shaped spectrum exp(-w^2/(2 B^2)); B is the rms bandwidth (rad/s)."""

    bandwidth: float
    variance: float = 1.0

    def __post_init__(self):
        if self.bandwidth <= 0 or self.variance <= 0:
            raise ValueError("bandwidth and variance must be positive")

    def density(self, w):
        w = np.asarray(w, dtype=np.float64)
        b = self.bandwidth
        return self.variance * math.sqrt(2.0 * math.pi) / b * np.exp(-(w * w) / (2.0 * b * b))

    @property
    def rms_bandwidth(self) -> float:
        return self.bandwidth


@dataclass(frozen=True)
class Butterworth:
    """Density 1/(1 + (w/W)^(2 kappa)); heavy-tailed as kappa -> 1."""

    kappa: float
    W: float

    def __post_init__(self):
        if self.kappa < 1.0:
            raise ValueError("shape parameter kappa must be >= 1")
        if self.W <= 0:
            raise ValueError("W must be positive")

    def density(self, w):
        w = np.asarray(w, dtype=np.float64)
        return 1.0 / (1.0 + np.abs(w / self.W) ** (2.0 * self.kappa))

    @property
    def rms_bandwidth(self) -> float:
        # finite only for kappa > 1.5; callers handle the divergent cases
        if self.kappa <= 1.5:
            return math.inf
        from scipy.special import beta

        k = self.kappa
        num = beta(3.0 / (2.0 * k), (2.0 * k - 3.0) / (2.0 * k))
        den = beta(1.0 / (2.0 * k), (2.0 * k - 1.0) / (2.0 * k))
        return self.W * math.sqrt(num / den)


@dataclass(frozen=True)
class ModifiedLorentzian:
    """Lorentzian spectrum band-limited by a second pole at W*gamma (gamma > 1)."""

    gamma: float
    W: float
    variance: float = 1.0

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ValueError("gamma must be > 1 (gamma = 1 collapses the two poles)")
        if self.W <= 0 or self.variance <= 0:
            raise ValueError("W and variance must be positive")

    def density(self, w):
        w = np.asarray(w, dtype=np.float64)
        g, W = self.gamma, self.W
        return (2.0 * self.variance * (1.0 + g)) / (
            W * g * (1.0 + (w / W) ** 2) * (1.0 + (w / (W * g)) ** 2)
        )

    def autocorrelation(self, tau):
        tau = np.abs(np.asarray(tau, dtype=np.float64))
        g, W = self.gamma, self.W
        return self.variance * (g * np.exp(-W * tau) - np.exp(-W * g * tau)) / (g - 1.0)

    @property
    def rms_bandwidth(self) -> float:
        # B^2 = -R''(0)/R(0) = W^2 * gamma
        return self.W * math.sqrt(self.gamma)


@dataclass(frozen=True)
class MultiSine:
    """Equal-amplitude sine waves with independent uniform phases on (-pi, pi)."""

    frequencies: tuple = ()
    amplitude: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        if not self.frequencies or any(f <= 0 for f in self.frequencies):
            raise ValueError("need at least one positive frequency (Hz)")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")


@dataclass(frozen=True)
class FMCarrier:
    """Sinusoidal carrier frequency-modulated by Gaussian noise.

    The instantaneous frequency is carrier_hz + d(t), where d(t) is
    Gaussian-shape noise with rms bandwidth noise_bandwidth_hz and rms
    deviation modulation_index * noise_bandwidth_hz.  For index >> 1 the
    occupied bandwidth (reciprocal of the time-resolution constant of the
    resulting near-Gaussian spectrum) is 2*sqrt(pi) * index * noise bandwidth.
    """

    carrier_hz: float
    noise_bandwidth_hz: float
    modulation_index: float

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.noise_bandwidth_hz <= 0:
            raise ValueError("carrier and noise bandwidth must be positive")
        if self.modulation_index < 0:
            raise ValueError("modulation index must be >= 0")

    @property
    def deviation_hz(self) -> float:
        return self.modulation_index * self.noise_bandwidth_hz

    @property
    def occupied_bandwidth_hz(self) -> float:
        return 2.0 * math.sqrt(math.pi) * self.deviation_hz


RANDOM_MODELS = (BandLimited, GaussianShape, Butterworth, ModifiedLorentzian)


@dataclass
class AnalyticPair:
    """Quadrature-splitter output: x is the Hilbert transform of y."""

    x: Waveform
    y: Waveform

    def __post_init__(self):
        if len(self.x) != len(self.y) or self.x.dt != self.y.dt:
            raise ValueError("x and y must share dt and length")


def _check_synth_args(n: int, dt: float):
    if n < 16:
        raise ValueError("need at least 16 samples")
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"sample interval must be finite and positive, got {dt}")


def synth_gaussian(model, n: int, dt: float, seed: int) -> Waveform:
    """Zero-mean Gaussian realization whose ensemble spectrum matches ``model``.

    Each rfft bin 0 < k <= n/2 gets amplitude sqrt(S(w_k) n / dt) times a
    circular unit complex Gaussian, so the expected periodogram |X_k|^2 dt/n
    equals S(w_k).  DC is zeroed (zero mean); the Nyquist bin is real.
    """
    _check_synth_args(n, dt)
    if not isinstance(model, RANDOM_MODELS):
        raise ValueError(
            f"synth_gaussian supports {[m.__name__ for m in RANDOM_MODELS]}, "
            f"got {type(model).__name__}"
        )
    rng = np.random.default_rng(seed)
    nbins = n // 2 + 1
    w = 2.0 * np.pi * np.fft.rfftfreq(n, d=dt)
    amp = np.sqrt(model.density(w) * n / dt)
    z = rng.standard_normal(nbins) + 1j * rng.standard_normal(nbins)
    z *= math.sqrt(0.5)
    spec = amp * z
    spec[0] = 0.0
    if n % 2 == 0:
        # real Nyquist bin with matching second moment
        spec[-1] = amp[-1] * math.sqrt(2.0) * np.real(z[-1])
    x = np.fft.irfft(spec, n=n)
    return Waveform(x, dt, label=f"{type(model).__name__.lower()} seed={seed}")


def synth_multisine(model: MultiSine, n: int, dt: float, seed: int) -> Waveform:
    """Sum of equal-amplitude sinusoids with uniform random phases."""
    _check_synth_args(n, dt)
    nyq = 0.5 / dt
    if max(model.frequencies) >= nyq:
        raise ValueError(f"tone at {max(model.frequencies)} Hz reaches Nyquist {nyq} Hz")
    rng = np.random.default_rng(model.seed if model.seed is not None else seed)
    phases = rng.uniform(-np.pi, np.pi, size=len(model.frequencies))
    t = np.arange(n) * dt
    x = np.zeros(n)
    for f, ph in zip(model.frequencies, phases):
        x += model.amplitude * np.sin(2.0 * np.pi * f * t + ph)
    return Waveform(x, dt, label=f"multisine x{len(model.frequencies)} seed={seed}")


def synth_fm_carrier(model: FMCarrier, n: int, dt: float, seed: int) -> Waveform:
    """Constant-envelope FM waveform cos(2 pi f0 t + phase(t))."""
    _check_synth_args(n, dt)
    nyq = 0.5 / dt
    if model.carrier_hz >= nyq:
        raise ValueError(f"carrier {model.carrier_hz} Hz reaches Nyquist {nyq} Hz")
    # keep the modulated spectrum inside (0, Nyquist): ~4 sigma of deviation
    if model.carrier_hz + 4.0 * model.deviation_hz >= nyq:
        raise ValueError("modulated bandwidth overflows past Nyquist")
    if 4.0 * model.deviation_hz >= model.carrier_hz:
        raise ValueError("deviation too large: instantaneous frequency would go negative")
    if model.modulation_index == 0:
        phase_mod = np.zeros(n)
    else:
        noise = synth_gaussian(
            GaussianShape(bandwidth=2.0 * np.pi * model.noise_bandwidth_hz),
            n,
            dt,
            seed,
        ).samples
        dev = 2.0 * np.pi * model.deviation_hz  # rad/s rms deviation
        # the synthesized noise has an exactly zero mean (no DC bin), so this
        # phase is circular over the record
        phase_mod = np.cumsum(dev * noise) * dt
        phase_mod -= phase_mod[0]
    # snap the carrier to the nearest DFT bin so the record is exactly
    # periodic and the discrete analytic envelope stays clean
    f0 = round(model.carrier_hz * n * dt) / (n * dt)
    t = np.arange(n) * dt
    x = np.cos(2.0 * np.pi * f0 * t + phase_mod)
    return Waveform(x, dt, label=f"fm f0={f0:g} seed={seed}")


def analytic_signal(w: Waveform) -> AnalyticPair:
    """Quadrature representation of ``w``: returns (x = H{y}, y = input).

    The discrete Hilbert transform doubles positive-frequency bins, zeroes
    negative ones and keeps DC/Nyquist; the first and last 2% of samples are
    marked untrusted via the pair's guard.
    """
    if len(w) < 4:
        raise ValueError("need at least 4 samples")
    z = hilbert(w.samples)
    guard = max(w.guard, HILBERT_EDGE_FRACTION * w.duration)
    x = Waveform(np.imag(z), w.dt, label=f"H[{w.label}]", guard=guard)
    y = Waveform(w.samples.copy(), w.dt, label=w.label, guard=guard)
    return AnalyticPair(x=x, y=y)


def delay_and_corrupt(w: Waveform, delay: float, snr_db: float, seed: int) -> Waveform:
    """Delay ``w`` by an arbitrary (fractional) amount and add white noise.

    The delay is a frequency-domain phase ramp, hence circular; the wrapped
    region is flagged through the output guard max(|delay|, 10 dt).  snr_db
    of +inf adds no noise.
    """
    T = w.duration
    if not abs(delay) < T / 2:
        raise ValueError(f"|delay| = {abs(delay)} must be < T/2 = {T / 2}")
    n = len(w)
    spec = np.fft.rfft(w.samples)
    wgrid = 2.0 * np.pi * np.fft.rfftfreq(n, d=w.dt)
    spec *= np.exp(-1j * wgrid * delay)
    x = np.fft.irfft(spec, n=n)
    if math.isfinite(snr_db):
        rng = np.random.default_rng(seed)
        sig_power = float(np.mean(w.samples**2))
        noise_power = sig_power / (10.0 ** (snr_db / 10.0))
        x = x + math.sqrt(noise_power) * rng.standard_normal(n)
    guard = max(w.guard, abs(delay), 10.0 * w.dt)
    return Waveform(x, w.dt, label=f"{w.label} delayed {delay:g}s snr={snr_db}dB", guard=guard)
