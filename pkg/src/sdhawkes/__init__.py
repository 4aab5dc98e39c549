"""State-dependent Hawkes processes with exponential kernels.

Simulation by thinning, linear-time likelihood and maximum-likelihood
estimation, time-change diagnostics, kernel-norm analysis and ingestion of
LOBSTER-style limit order book files.
"""

from .analysis import kernel_norm_matrix, perron_root, spectral_radius, truncated_kernel_norm
from .diagnostics import event_residuals, ks_exp1, residuals, total_residuals
from .estimate import EstimateResult, FitConfig, fit, fit_ordinary
from .estimator import StateDependentHawkes
from .exceptions import (
    EstimationError,
    ExplosionError,
    InvalidInputError,
    NumericalError,
    ParseError,
    SdHawkesError,
)
from .intensity import IntensityState, compensator, intensity_at, lifted_intensity_at
from .likelihood import gradient, log_likelihood, log_likelihood_naive, transition_mle
from .model import (
    Dimensions,
    MarkedSequence,
    SdHawkesModel,
    check_stability,
    lift_sequence,
    unlift_sequence,
    validate,
)
from .simulate import SimulationConfig, make_rng, simulate, simulate_next

__version__ = "0.1.0"
