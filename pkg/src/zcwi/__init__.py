"""Zero-crossing waveform interferometry.

Crosslation and autoference functions of random waveforms, their closed-form
references, resolution-gain and variance-bound analysis, a streaming
crosslator emulator and a Monte-Carlo time-delay-estimation harness.
"""

from .crossings import CrossingEvent, CrossingSet, detect_crossings, sign_train, slope_at
from .interferograms import (
    ComplexCrosslation,
    Interferogram,
    autoference_from_crosslation,
    complex_crosslation,
    crosslation_by_convolution,
    decimate_by_slew,
    empirical_autoference,
    empirical_crosslation,
    empirical_down,
    empirical_up,
    extract_crossjectories,
    filterbank_interferogram,
    local_structure,
    slew_matched,
    spectrum_from_crosslation,
    weighted_autoference,
)
from .reference import (
    CRReport,
    DofReport,
    ResolutionReport,
    bandlimited_family,
    butterworth_gain,
    cr_bounds,
    degrees_of_freedom,
    gamma_star,
    lorentzian_family,
    lorentzian_gain,
    structure_global_gaussian,
    structure_local_gaussian,
    woodward_by_quadrature,
    woodward_constants,
)
from .signals import (
    AnalyticPair,
    BandLimited,
    Butterworth,
    FMCarrier,
    GaussianShape,
    ModifiedLorentzian,
    MultiSine,
    Waveform,
    analytic_signal,
    delay_and_corrupt,
    synth_fm_carrier,
    synth_gaussian,
    synth_multisine,
)
from .streaming import StreamingCrosslator, StreamReport

__version__ = "0.1.0"
