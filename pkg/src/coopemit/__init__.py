"""Photon correlations and two-photon interference of one or two quantum emitters."""

__version__ = "0.1.0"

from .dynamics import (
    DriveKind,
    DriveProtocol,
    EmissionModel,
    EmitterParams,
    Liouvillian,
    NumericalError,
    build_generator,
    lindblad_dissipator,
    propagate,
    steady_state,
)
from .emission import (
    DipoleSet,
    WaveVectorPair,
    directional_coincidence,
    dipole_set,
    g2_zero_cooperative,
    g2_zero_independent,
)
from .correlators import (
    CorrelationTrace,
    Normalization,
    PulsedHistogram,
    analytic_g2_cw,
    analytic_g2_pulsed_peak,
    g1_cw,
    g2_cw,
    g2_pulsed,
    integrate_peak,
    time_resolved_intensity,
    two_time_g2,
)
from .interference import (
    HomConfig,
    coherence_time_window,
    hom_cross_correlation,
    hom_cw,
    hom_pulsed,
    hom_pulsed_pair,
    visibility,
)
from .instrument import CountHistogram, IrfModel, convolve, sample_histogram
from .analysis import (
    FidelityReport,
    FitResult,
    entanglement_fidelity,
    exponential_tail_fit,
    fit_g2_cw,
    fit_g2_pulsed_peak,
    noise_ratio_from_g2,
)

__all__ = [
    "DriveKind",
    "DriveProtocol",
    "EmissionModel",
    "EmitterParams",
    "Liouvillian",
    "NumericalError",
    "build_generator",
    "lindblad_dissipator",
    "propagate",
    "steady_state",
    "DipoleSet",
    "WaveVectorPair",
    "directional_coincidence",
    "dipole_set",
    "g2_zero_cooperative",
    "g2_zero_independent",
    "CorrelationTrace",
    "Normalization",
    "PulsedHistogram",
    "analytic_g2_cw",
    "analytic_g2_pulsed_peak",
    "g1_cw",
    "g2_cw",
    "g2_pulsed",
    "integrate_peak",
    "time_resolved_intensity",
    "two_time_g2",
    "HomConfig",
    "coherence_time_window",
    "hom_cross_correlation",
    "hom_cw",
    "hom_pulsed",
    "hom_pulsed_pair",
    "visibility",
    "FidelityReport",
    "FitResult",
    "entanglement_fidelity",
    "exponential_tail_fit",
    "fit_g2_cw",
    "fit_g2_pulsed_peak",
    "noise_ratio_from_g2",
    "CountHistogram",
    "IrfModel",
    "convolve",
    "sample_histogram",
]
