"""Simulation and verification toolkit for supercritical Gaussian multiplicative chaos."""

from .atomic import (AtomicMeasure, GridIntensity, LebesgueIntensity, beta_constant,
                     fractional_moment_closed_form, laplace_closed_form,
                     negative_moment_closed_form, sample_atomic, sample_total_masses)
from .config import ConfigError, RunConfig, parse_config
from .fields import (GridField, GridSpec, sample_decomposed_conv, sample_martingale_path,
                     sample_stationary)
from .gmc import (GridMeasure, apply_diagonal_tilt, chaos_measure, derivative_measure,
                  supercritical_norm, top_cells_fraction)
from .kernels import (Mollifier, SeedKernel, ball_seed_kernel, bump_mixture, standard_mollifier,
                      truncate_kernel, validate_mollifier, validate_seed)
from .spectral import (AdmissibilityError, DecompositionCertificate, certify, find_admissible_a,
                       frequency_scan, verify_identity)
from .stats import (EnsembleSummary, ScalingFit, covariance_comparison, hill_index, kahane_check,
                    mc_laplace, multifractal_fit)

__version__ = "0.1.0"
