"""Closed-form reference functions and resolution/bound analysis.

This is the oracle layer: structure functions, the conditional (Slepian)
moments of Gaussian processes, exact crosslation/autoference component pairs
for the band-limited and band-limited-Lorentzian spectra, Woodward resolution
constants with their crosslation counterparts, degrees-of-freedom bookkeeping
and the time-delay variance bounds.  Every closed form has an independent
quadrature route for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import exp1, expi, gammaln

from .signals import BandLimited, Butterworth, GaussianShape, ModifiedLorentzian

__all__ = [
    "ResolutionReport",
    "DofReport",
    "CRReport",
    "structure_global_gaussian",
    "structure_local_gaussian",
    "crosslation_gaussian",
    "gaussian_family",
    "slepian_mean_and_variance",
    "bandlimited_family",
    "lorentzian_family",
    "woodward_constants",
    "woodward_by_quadrature",
    "woodward_from_table",
    "butterworth_gain",
    "lorentzian_gain",
    "degrees_of_freedom",
    "dof_from_autocorrelation",
    "gamma_star",
    "cr_bounds",
    "GAUSS_MU_FACTOR",
]

# mu for a Gaussian process is (1/sigma) * sqrt(2/pi)
GAUSS_MU_FACTOR = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ResolutionReport:
    """Woodward resolution constants for correlation and crosslation processing."""

    delta_tau: float
    delta_tau_c: float
    method: str  # closed_form | quadrature

    @property
    def gain(self) -> float:
        if self.delta_tau_c == 0.0:
            return math.inf
        return self.delta_tau / self.delta_tau_c

    @property
    def occupied_bandwidth(self) -> float:
        """1/delta_tau, in hertz."""
        return 1.0 / self.delta_tau


@dataclass(frozen=True)
class DofReport:
    """Degrees of freedom vs expected zero-crossing count over an interval."""

    dof: float
    n_c_expected: float
    regime: str  # underdetermined | determined | overdetermined


@dataclass(frozen=True)
class CRReport:
    """Variance bounds (s^2) for correlation- and crosslation-based delay estimators."""

    var_correlation: float
    var_crosslation: float

    @property
    def ratio(self) -> float:
        return self.var_crosslation / self.var_correlation


# ---------------------------------------------------------------------------
# structure functions and Slepian moments (Gaussian-shape correlation)
# ---------------------------------------------------------------------------


def _gauss_r(B: float, tau):
    tau = np.asarray(tau, dtype=np.float64)
    return np.exp(-(B * B) * tau * tau / 2.0)


def structure_global_gaussian(B: float, variance: float, tau):
    """Global structure function 2 sigma^2 (1 - r), Gaussian-shape correlation."""
    return 2.0 * variance * (1.0 - _gauss_r(B, tau))


def structure_local_gaussian(B: float, variance: float, tau):
    """Local (crossing-conditioned) structure function, the second moment of
    the conditional process: sigma^2 (1 - r^2 + (B tau r)^2)."""
    tau = np.asarray(tau, dtype=np.float64)
    r = _gauss_r(B, tau)
    return variance * (1.0 - r * r + (B * tau * r) ** 2)


def crosslation_gaussian(rprime, B: float, sigma: float, tau):
    """Crosslation function of a Gaussian process: -sqrt(pi/2) R'(tau) / (B sigma)."""
    return -math.sqrt(math.pi / 2.0) * np.asarray(rprime(tau)) / (B * sigma)


def gaussian_family(B: float, variance: float, tau):
    """R, R' and the crosslation function for a Gaussian-shape spectrum."""
    tau = np.asarray(tau, dtype=np.float64)
    r = _gauss_r(B, tau)
    R = variance * r
    Rp = -variance * B * B * tau * r
    C = -math.sqrt(math.pi / 2.0) * Rp / (B * math.sqrt(variance))
    return {"R": R, "Rprime": Rp, "C": C}


def _numeric_derivative(f, tau, h: float):
    tau = np.asarray(tau, dtype=np.float64)
    return (8.0 * (f(tau + h) - f(tau - h)) - (f(tau + 2 * h) - f(tau - 2 * h))) / (12.0 * h)


def slepian_mean_and_variance(R, B: float, sigma: float, tau, rprime=None):
    """Mean and self-noise variance of the crossing-conditioned process.

    ``R`` is the autocorrelation (callable); its derivative is taken
    numerically unless ``rprime`` is supplied.  Returns (mean, variance) with
    mean = -sqrt(pi/2) R'/(B sigma) and variance = sigma^2 - R^2/sigma^2
    - R'^2/(B sigma)^2, which rises from 0 at tau = 0 to sigma^2.
    """
    tau = np.asarray(tau, dtype=np.float64)
    h = 1e-4 / B
    Rp = np.asarray(rprime(tau)) if rprime is not None else _numeric_derivative(R, tau, h)
    Rv = np.asarray(R(tau))
    mean = -math.sqrt(math.pi / 2.0) * Rp / (B * sigma)
    var = sigma**2 - Rv**2 / sigma**2 - Rp**2 / (B * sigma) ** 2
    return mean, np.maximum(var, 0.0)


# ---------------------------------------------------------------------------
# band-limited (rectangular low-pass) family
# ---------------------------------------------------------------------------


def bandlimited_family(W: float, sigma: float, tau):
    """Correlation/crosslation component pairs of rectangular low-pass noise.

    Returns R, RXY = H{R}, their envelope envR, the crosslation component C,
    the autoference component A and the crosslation envelope envA.  Small-lag
    evaluation switches to series so all parities are exact in floating point.
    """
    tau = np.asarray(tau, dtype=np.float64)
    w = W * tau
    s2 = sigma * sigma
    scale = sigma * math.sqrt(1.5 * math.pi)
    small = np.abs(w) < 0.05
    ws = np.where(small, 1.0, w)  # keep divisions finite on the small branch

    R = s2 * np.sinc(w / np.pi)

    rxy_exact = s2 * (1.0 - np.cos(ws)) / ws
    rxy_series = s2 * (w / 2.0 - w**3 / 24.0 + w**5 / 720.0)
    RXY = np.where(small, rxy_series, rxy_exact)

    envR = s2 * np.abs(np.sinc(w / (2.0 * np.pi)))

    c_exact = scale * (np.sin(ws) - ws * np.cos(ws)) / (ws * ws)
    c_series = scale * (w / 3.0 - w**3 / 30.0 + w**5 / 840.0)
    C = np.where(small, c_series, c_exact)

    a_exact = scale * (ws * np.sin(ws) + np.cos(ws) - 1.0) / (ws * ws)
    a_series = scale * (0.5 - w**2 / 8.0 + w**4 / 144.0 - w**6 / 5760.0)
    A = np.where(small, a_series, a_exact)

    # the envelope numerator cancels to O(w^4), so it needs a wider series
    # region than the components
    env_small = np.abs(w) < 0.15
    wse = np.where(env_small, 1.0, w)
    env_exact = scale * np.sqrt(
        np.maximum(wse * wse - 2.0 * wse * np.sin(wse) - 2.0 * np.cos(wse) + 2.0, 0.0)
    ) / (wse * wse)
    env_series = scale * 0.5 * np.sqrt(
        np.maximum(1.0 - w * w / 18.0 + w**4 / 720.0 - w**6 / 50400.0, 0.0)
    )
    envA = np.where(env_small, env_series, env_exact)

    return {"R": R, "RXY": RXY, "envR": envR, "C": C, "A": A, "envA": envA}


# ---------------------------------------------------------------------------
# band-limited Lorentzian family (exponential integrals)
# ---------------------------------------------------------------------------


def _e1_scaled(x):
    """exp(x) * E1(x) for x > 0, safe for large x."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    lo = x < 50.0
    out[lo] = np.exp(x[lo]) * exp1(x[lo])
    hi = ~lo
    if hi.any():
        xi = x[hi]
        total = np.ones_like(xi)
        term = np.ones_like(xi)
        for k in range(1, 30):
            term = term * (-k) / xi
            total += term
            if np.all(np.abs(term) < 1e-17):
                break
        out[hi] = total / xi
    return out


def _ei_scaled(x):
    """exp(-x) * Ei(x) for x > 0, safe for large x."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    lo = x < 50.0
    out[lo] = np.exp(-x[lo]) * expi(x[lo])
    hi = ~lo
    if hi.any():
        xi = x[hi]
        total = np.ones_like(xi)
        term = np.ones_like(xi)
        for k in range(1, 30):
            term = term * k / xi
            total += term
            if np.all(np.abs(term) < 1e-17):
                break
        out[hi] = total / xi
    return out


def hilbert_exp_even(x):
    """H{exp(-|t|)} evaluated at |t| = x, without the sign(t) factor (x > 0)."""
    return (_e1_scaled(x) + _ei_scaled(x)) / np.pi


def hilbert_exp_odd(x):
    """H{sign(t) exp(-|t|)} at |t| = x (even in t; diverges like (2/pi) ln x at 0)."""
    return (_ei_scaled(x) - _e1_scaled(x)) / np.pi


def lorentzian_family(gamma: float, W: float, variance: float, tau):
    """Correlation/crosslation components for the band-limited Lorentzian spectrum.

    The Hilbert images use exp(x) E1(x) and exp(-x) Ei(x) combinations; the
    lone logarithmic singularities of the two autoference terms cancel, with
    A(0) = sqrt(2/pi) sigma sqrt(gamma) ln(gamma) / (gamma - 1).
    """
    if gamma <= 1.0:
        raise ValueError("gamma must be > 1")
    tau = np.asarray(tau, dtype=np.float64)
    sigma = math.sqrt(variance)
    g = gamma
    at = np.abs(tau)
    sg = np.sign(tau)
    ea = np.exp(-W * at)
    eb = np.exp(-W * g * at)

    R = variance * (g * ea - eb) / (g - 1.0)

    nz = at > 0
    x1 = W * at[nz]
    x2 = W * g * at[nz]

    HR = np.zeros_like(tau)
    HR[nz] = (
        variance * sg[nz] * (g * hilbert_exp_even(x1) - hilbert_exp_even(x2)) / (g - 1.0)
    )

    envR = np.hypot(R, HR)

    C = math.sqrt(math.pi / 2.0) * sigma * math.sqrt(g) / (g - 1.0) * sg * (ea - eb)

    A = np.empty_like(tau)
    A[~nz] = math.sqrt(2.0 / math.pi) * sigma * math.sqrt(g) * math.log(g) / (g - 1.0)
    A[nz] = (
        -math.sqrt(math.pi / 2.0)
        * sigma
        * math.sqrt(g)
        / (g - 1.0)
        * (hilbert_exp_odd(x1) - hilbert_exp_odd(x2))
    )

    envA = np.hypot(A, C)
    return {"R": R, "HR": HR, "envR": envR, "C": C, "A": A, "envA": envA}


# ---------------------------------------------------------------------------
# Woodward resolution constants
# ---------------------------------------------------------------------------

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-11, limit=400)


def _tail_integral(h, a: float, power: float) -> float:
    """integral of h on (a, inf) for h ~ C w^-power; substitution flattens the tail."""
    if power <= 1.0:
        raise ValueError("tail decays too slowly to integrate")
    ex = 1.0 / (1.0 - power)
    f = lambda u: h(a * u**ex) * (a / (power - 1.0)) * u ** (ex - 1.0)
    val, _ = integrate.quad(f, 0.0, 1.0, **_QUAD_OPTS)
    return val


def _semi_infinite(h, scale: float, tail_power: float | None) -> float:
    head, _ = integrate.quad(h, 0.0, scale, **_QUAD_OPTS)
    if tail_power is not None:
        return head + _tail_integral(h, scale, tail_power)
    tail, _ = integrate.quad(h, scale, np.inf, **_QUAD_OPTS)
    return head + tail


def woodward_by_quadrature(
    density,
    scale: float,
    tail_powers: tuple | None = None,
    upper: float | None = None,
) -> ResolutionReport:
    """Resolution constants by adaptive quadrature of a one-sided density.

    ``tail_powers`` gives the large-w decay exponents of (S, S^2, wS, w^2 S^2)
    so the semi-infinite tails can be flattened exactly; ``upper`` truncates
    the integrals for finite-support densities.
    """
    hs = (
        lambda w: density(w),
        lambda w: density(w) ** 2,
        lambda w: w * density(w),
        lambda w: w * w * density(w) ** 2,
    )
    if upper is not None:
        vals = [integrate.quad(h, 0.0, upper, **_QUAD_OPTS)[0] for h in hs]
    else:
        powers = tail_powers if tail_powers is not None else (None,) * 4
        vals = [_semi_infinite(h, scale, p) for h, p in zip(hs, powers)]
    I1, I2, I3, I4 = vals
    return ResolutionReport(
        delta_tau=2.0 * math.pi * I2 / I1**2,
        delta_tau_c=2.0 * math.pi * I4 / I3**2,
        method="quadrature",
    )


def woodward_from_table(omega: np.ndarray, density: np.ndarray) -> ResolutionReport:
    """Resolution constants from a tabulated one-sided density (trapezoid rule)."""
    omega = np.asarray(omega, dtype=np.float64)
    S = np.asarray(density, dtype=np.float64)
    I1 = np.trapezoid(S, omega)
    I2 = np.trapezoid(S * S, omega)
    I3 = np.trapezoid(omega * S, omega)
    I4 = np.trapezoid(omega * omega * S * S, omega)
    return ResolutionReport(
        delta_tau=2.0 * math.pi * I2 / I1**2,
        delta_tau_c=2.0 * math.pi * I4 / I3**2,
        method="quadrature",
    )


def _lnbeta(a: float, b: float) -> float:
    return gammaln(a) + gammaln(b) - gammaln(a + b)


def butterworth_gain(kappa: float) -> float:
    """Resolution gain for the Butterworth density, via beta functions.

    Diverges (returns +inf) at kappa = 1, where the first-moment integral of
    the density stops converging.
    """
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    if kappa == 1.0:
        return math.inf
    k = kappa
    ln_num = _lnbeta(1.0 / (2 * k), (4 * k - 1) / (2 * k)) + 2.0 * _lnbeta(
        1.0 / k, (k - 1) / k
    )
    ln_den = 2.0 * _lnbeta(1.0 / (2 * k), (2 * k - 1) / (2 * k)) + _lnbeta(
        3.0 / (2 * k), (4 * k - 3) / (2 * k)
    )
    return math.exp(ln_num - ln_den)


def lorentzian_gain(gamma: float) -> float:
    """Resolution gain 4 (g^2 + 3g + 1) ln^2(g) / (pi^2 (g - 1)^2).

    Limit-safe near g = 1 (value 20/pi^2) and monotonically unbounded as the
    band-limiting pole recedes.
    """
    if gamma < 1.0:
        raise ValueError("gamma must be >= 1")
    if gamma == 1.0:
        return 20.0 / math.pi**2
    g = gamma
    d = g - 1.0
    if abs(d) < 1e-8:
        # ln^2(g)/(g-1)^2 = 1 - d + (11/12) d^2 + O(d^3)
        ratio = 1.0 - d + (11.0 / 12.0) * d * d
    else:
        ratio = (math.log(g) / d) ** 2
    return 4.0 * (g * g + 3.0 * g + 1.0) * ratio / math.pi**2


def _butterworth_constants(kappa: float, W: float) -> ResolutionReport:
    k = kappa
    I1 = (W / (2 * k)) * math.exp(_lnbeta(1 / (2 * k), (2 * k - 1) / (2 * k)))
    I2 = (W / (2 * k)) * math.exp(_lnbeta(1 / (2 * k), (4 * k - 1) / (2 * k)))
    dtau = 2.0 * math.pi * I2 / I1**2
    return ResolutionReport(dtau, dtau / butterworth_gain(kappa), "closed_form")


def woodward_constants(model) -> ResolutionReport:
    """Resolution constants for a spectrum model; closed forms when available."""
    if isinstance(model, BandLimited):
        w1, w2 = model.low, model.W
        dtau = 2.0 * math.pi / (w2 - w1)
        dtauc = (8.0 * math.pi / 3.0) * (w2**3 - w1**3) / (w2**2 - w1**2) ** 2
        return ResolutionReport(dtau, dtauc, "closed_form")
    if isinstance(model, GaussianShape):
        B = model.bandwidth
        return ResolutionReport(2.0 * math.sqrt(math.pi) / B, math.pi**1.5 / (2.0 * B), "closed_form")
    if isinstance(model, Butterworth):
        if model.kappa == 1.0:
            # pure Lorentzian: delta_tau = 2/W but the crosslation constant
            # collapses to 0 (infinite gain sentinel)
            return ResolutionReport(2.0 / model.W, 0.0, "closed_form")
        return _butterworth_constants(model.kappa, model.W)
    if isinstance(model, ModifiedLorentzian):
        g, W = model.gamma, model.W
        rep = woodward_by_quadrature(
            model.density, scale=W * g, tail_powers=(4.0, 8.0, 3.0, 6.0)
        )
        return rep
    raise ValueError(f"no spectral density for {type(model).__name__}")


# ---------------------------------------------------------------------------
# degrees of freedom, gamma*, CR bounds
# ---------------------------------------------------------------------------


def _regime(n_c: float, dof: float) -> str:
    if not math.isfinite(n_c):
        return "overdetermined"
    if abs(n_c - dof) <= 1e-9 * max(n_c, dof):
        return "determined"
    return "underdetermined" if n_c < dof else "overdetermined"


def dof_from_autocorrelation(R, T: float, upper: float) -> float:
    """Degrees of freedom T R(0)^2 / int R^2 dtau by time-domain quadrature."""
    val, _ = integrate.quad(lambda t: R(t) ** 2, 0.0, upper, **_QUAD_OPTS)
    return T * float(R(0.0)) ** 2 / (2.0 * val)


def degrees_of_freedom(model, T: float) -> DofReport:
    """Degrees of freedom and expected crossing count over an interval T."""
    if isinstance(model, BandLimited):
        dof = (model.W - model.low) * T / math.pi
    elif isinstance(model, GaussianShape):
        dof = model.bandwidth * T / math.sqrt(math.pi)
    elif isinstance(model, ModifiedLorentzian):
        dof = dof_from_autocorrelation(model.autocorrelation, T, upper=60.0 / model.W)
    elif isinstance(model, Butterworth):
        if model.kappa == 1.0:
            dof = T * model.W  # pure Lorentzian: R ~ exp(-W|tau|)
        else:
            dof = 2.0 * T / _butterworth_constants(model.kappa, model.W).delta_tau
    else:
        raise ValueError(f"no degrees-of-freedom rule for {type(model).__name__}")
    B = model.rms_bandwidth
    n_c = T * B / math.pi if math.isfinite(B) else math.inf
    return DofReport(dof=dof, n_c_expected=n_c, regime=_regime(n_c, dof))


def gamma_star(W: float = 1.0, lo: float = 2.0, hi: float = 20.0, tol: float = 1e-6) -> float:
    """Band-limiting parameter where crossings exactly determine the waveform.

    Bisects dof(gamma) = n_c(gamma) for the band-limited Lorentzian, with the
    degrees of freedom integrated numerically and n_c from the crossing rate
    W sqrt(gamma) / pi.  Scale-invariant in W and T.
    """

    def f(g: float) -> float:
        model = ModifiedLorentzian(gamma=g, W=W)
        dof = dof_from_autocorrelation(model.autocorrelation, 1.0, upper=60.0 / W)
        return dof - W * math.sqrt(g) / math.pi

    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ValueError("root not bracketed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if flo * fmid <= 0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def cr_bounds(noise_var: float, signal_var: float, B: float, dof: float, n_c: float) -> CRReport:
    """Variance bounds for unbiased delay estimators at weak noise.

    Correlation-based processing: noise_var / (dof signal_var B^2).
    Crosslation-based processing samples at crossings, whose squared slopes
    average twice the unconditional mean square derivative, so the bound is
    halved once n_c reaches the degrees of freedom (and scales with n_c below).
    """
    if min(noise_var, signal_var, B, dof, n_c) <= 0:
        raise ValueError("all bound parameters must be positive")
    base = signal_var * B * B
    var_corr = noise_var / (dof * base)
    var_cross = noise_var / (2.0 * min(n_c, dof) * base)
    return CRReport(var_correlation=var_corr, var_crosslation=var_cross)
