"""Spectra and propagators of a quantum particle on a circle with point singularities."""

from .u2 import (
    CharacteristicMatrix,
    Geometry,
    SpectralTriple,
    SubfamilyReport,
    classify,
    from_matrix,
    haar_random,
    induced_map,
    p_theta_map,
    parity_map,
    pt_map,
    spectral_triple,
    time_reversal_map,
    to_matrix,
    triple_to_matrix,
)
from .spectrum import (
    Level,
    Spectrum,
    degeneracy_at,
    eigenfunction,
    full_spectrum,
    negative_levels,
    positive_levels,
    probability_current,
    scale_independence_check,
    secular_negative,
    secular_positive,
    verify_susy_pairing,
    zero_mode_exists,
)

__all__ = [
    "CharacteristicMatrix",
    "Geometry",
    "SpectralTriple",
    "SubfamilyReport",
    "Level",
    "Spectrum",
    "classify",
    "degeneracy_at",
    "eigenfunction",
    "from_matrix",
    "full_spectrum",
    "haar_random",
    "induced_map",
    "negative_levels",
    "p_theta_map",
    "parity_map",
    "positive_levels",
    "probability_current",
    "pt_map",
    "scale_independence_check",
    "secular_negative",
    "secular_positive",
    "spectral_triple",
    "time_reversal_map",
    "to_matrix",
    "triple_to_matrix",
    "verify_susy_pairing",
    "zero_mode_exists",
]
