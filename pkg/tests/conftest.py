import numpy as np
import pytest

from zcwi.crossings import detect_crossings
from zcwi.signals import GaussianShape, synth_gaussian

GAUSS_B = 1.0
GAUSS_DT = 0.1
GAUSS_SEED = 42


@pytest.fixture(scope="session")
def gauss_wave():
    """Long Gaussian-shape record shared by the statistics-heavy tests."""
    return synth_gaussian(GaussianShape(bandwidth=GAUSS_B), 2**19, GAUSS_DT, GAUSS_SEED)


@pytest.fixture(scope="session")
def gauss_crossings(gauss_wave):
    return detect_crossings(gauss_wave)


def z_scores(values, reference, stderr, floor_scale=1e-9):
    """Per-lag z statistics with a floor on degenerate (float-dust) bars."""
    floor = floor_scale * max(np.max(np.abs(reference)), 1.0)
    return (np.asarray(values) - np.asarray(reference)) / np.maximum(stderr, floor)
