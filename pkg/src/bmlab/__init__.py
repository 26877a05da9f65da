"""Breuer-Major theorems for lattice Gaussian fields, as numerical experiments.

Hermite expansions, lattice covariances and the discrete Green function,
exact field samplers, the chaos decomposition of ``<Phi_N, f>``, negative
Sobolev norms and a seeded Monte Carlo harness with statistical verdicts.
"""

from .basis import eigenmode, kernel_bound, project, sobolev_coefficients, sobolev_norm_sq
from .chaos import (Normalization, TestFunction, chaos_component, contraction_norm_sq, exact_covariance,
                    exact_variance, fourth_moment_gap, functional, limit_variance)
from .config import ExperimentConfig, parse_observable
from .covariance import (CovarianceModel, continuous_green, discrete_green, green_function, lq_sum,
                         periodized_covariance, spectral_density)
from .errors import (BMLabError, ConfigError, DivergenceError, EmbeddingError, FeasibilityError,
                     GreenMismatchError, QuadratureError, SingularityError, WindowError)
from .hermite import HermiteExpansion, expand, hermite_rank, limit_constant
from .sampler import FieldSample, Window, extract_window, gradient_field, sample_gff, sample_stationary
from .stats import MomentAccumulator, Verdict, covariance_verdict, ks_normal_test

__version__ = "0.1.0"

__all__ = [
    "BMLabError", "ConfigError", "CovarianceModel", "DivergenceError", "EmbeddingError", "ExperimentConfig",
    "FeasibilityError", "FieldSample", "GreenMismatchError", "HermiteExpansion", "MomentAccumulator",
    "Normalization", "QuadratureError", "SingularityError", "TestFunction", "Verdict", "Window", "WindowError",
    "chaos_component", "continuous_green", "contraction_norm_sq", "covariance_verdict", "discrete_green",
    "eigenmode", "exact_covariance", "exact_variance", "expand", "extract_window", "fourth_moment_gap",
    "functional", "gradient_field", "green_function", "hermite_rank", "kernel_bound", "ks_normal_test",
    "limit_constant", "limit_variance", "lq_sum", "parse_observable", "periodized_covariance", "project",
    "sample_gff", "sample_stationary", "sobolev_coefficients", "sobolev_norm_sq", "spectral_density",
]
