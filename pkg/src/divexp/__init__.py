"""Numerical experiments on exponential sums of the divisor function."""
from .afe import AFEReport, afe_check, afe_rhs, fit_exponent, painoton_check
from .arithmetic import (AlphaSplit, DivisorTable, FareyFraction, divisor_sieve, e_phase,
                         mod_inverse, term_phase)
from .errors import NumericBudgetError, ValidationError
from .expsum import (SmoothingSpec, SumSpec, main_term_integral, mean_square, raw_sum,
                     smoothed_sum)
from .farey import AFEParams, beta_ladder, exceptional_measure, farey_approx, farey_sequence
from .oscint import (AmplitudeSpec, PhaseSpec, SaddleResult, jm_decay_probe, osc_quadrature,
                     saddle_eval, saddle_locate)
from .voronoi import VoronoiExpansion, bessel_K0, bessel_Y0, tail_probe, voronoi_rhs, y0_asymptotic
from .weights import WeightFunction, build_eta_J, build_partition, indicator

__version__ = "0.1.0"

__all__ = [
    "AFEReport", "afe_check", "afe_rhs", "fit_exponent", "painoton_check", "AlphaSplit",
    "DivisorTable", "FareyFraction", "divisor_sieve", "e_phase", "mod_inverse", "term_phase",
    "NumericBudgetError", "ValidationError", "SmoothingSpec", "SumSpec", "main_term_integral",
    "mean_square", "raw_sum", "smoothed_sum", "AFEParams", "beta_ladder", "exceptional_measure",
    "farey_approx", "farey_sequence", "AmplitudeSpec", "PhaseSpec", "SaddleResult",
    "jm_decay_probe", "osc_quadrature", "saddle_eval", "saddle_locate", "VoronoiExpansion",
    "bessel_K0", "bessel_Y0", "tail_probe", "voronoi_rhs", "y0_asymptotic", "WeightFunction",
    "build_eta_J", "build_partition", "indicator",
]
