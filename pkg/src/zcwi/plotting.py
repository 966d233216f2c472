"""Figure rendering for the CLI report paths.

Every data-emitting command can render a matplotlib figure next to its CSV;
these helpers own the styling so the command layer stays declarative.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_waveform",
    "plot_crossings",
    "plot_interferogram",
    "plot_envelope",
    "plot_nyquist",
    "plot_spectrum",
    "plot_curve",
    "plot_dof_curves",
]

_FIGSIZE = (6.4, 4.0)


def _finish(fig, ax, path, xlabel, ylabel, title=""):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_waveform(times, values, path, label=""):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(times, values, lw=0.7)
    return _finish(fig, ax, path, "t [s]", "amplitude [V]", label)


def plot_crossings(times, values, crossing_times, path, label=""):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(times, values, lw=0.7)
    ax.plot(crossing_times, np.zeros_like(crossing_times), "r.", ms=4)
    ax.axhline(0.0, color="k", lw=0.5)
    return _finish(fig, ax, path, "t [s]", "amplitude [V]", label)


def plot_interferogram(lags, values, path, stderr=None, label="", reference=None):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    if stderr is not None and np.any(stderr > 0):
        ax.fill_between(lags, values - 2 * stderr, values + 2 * stderr, alpha=0.25, lw=0)
    ax.plot(lags, values, lw=1.0)
    if reference is not None:
        ax.plot(lags, reference, "k--", lw=0.8, label="reference")
        ax.legend()
    return _finish(fig, ax, path, "relative time tau [s]", "amplitude [V]", label)


def plot_envelope(lags, A, C, envelope, path, label=""):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(lags, A, lw=0.9, label="even component")
    ax.plot(lags, C, lw=0.9, label="odd component")
    ax.plot(lags, envelope, "k", lw=1.2, label="envelope")
    ax.legend()
    return _finish(fig, ax, path, "relative time tau [s]", "amplitude [V]", label)


def plot_nyquist(A, C, path, label=""):
    fig, ax = plt.subplots(figsize=(4.6, 4.6))
    ax.plot(A, C, lw=0.8)
    ax.set_aspect("equal", adjustable="datalim")
    return _finish(fig, ax, path, "even component", "odd component", label)


def plot_spectrum(omega, density, path, label="", target=None):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(omega, density, lw=1.0)
    if target is not None:
        ax.plot(omega, target, "k--", lw=0.8, label="target")
        ax.legend()
    return _finish(fig, ax, path, "angular frequency [rad/s]", "density", label)


def plot_curve(x, y, path, xlabel, ylabel, label="", logy=False):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    (ax.semilogy if logy else ax.plot)(x, y, lw=1.2)
    return _finish(fig, ax, path, xlabel, ylabel, label)


def plot_dof_curves(gamma, dof_per_wt, crossings_per_wt, path):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(gamma, dof_per_wt, label="degrees of freedom / WT")
    ax.plot(gamma, crossings_per_wt, label="crossings / WT")
    ax.legend()
    return _finish(fig, ax, path, "band-limiting parameter", "normalized count")
