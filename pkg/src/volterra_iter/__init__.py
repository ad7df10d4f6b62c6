"""Norm asymptotics of iterated Volterra convolution operators on L^p(0, 1)."""

from .asymptotics import (
    AsymptoticValue,
    EquivalenceTrace,
    asymptotic_norm,
    decay_ratio,
    equivalence_ratio,
    extremal_function,
    kernel_op_norm,
    rank1_apply,
    s_lambda_norm_exact,
)
from .errors import DomainError, NormNotConverged, NumericalError, UnsupportedError, UsageError, VolterraError
from .grid import GridSpec, ScaledGridFunction, conv_power_numeric, convolve, discretize, restricted_l1
from .kernels import PowerExpKernel, SmoothFactorKernel, conv_power_closed_form, parse_kernel, tangent_kernel
from .largedev import DensitySpec, LargeDevReport, largedev_report, prob_sum_leq1_grid, prob_sum_leq1_mc
from .norms import NormEstimate, lp_norm, op_norm, rayleigh_quotient, volterra_apply
from .special import HolderExponent, cp_constant, log_gamma

__version__ = "0.1.0"
