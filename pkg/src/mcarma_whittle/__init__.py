"""Estimation for discretely sampled Levy-driven multivariate CARMA processes."""

from .asymptotics import confidence_intervals, sigma_W, sigma_W_adjusted
from .estimator import WhittleEstimator
from .exceptions import MCARMAError, NumericalError, ValidationError
from .levy import LevySpec, SamplePath, SimulationConfig, euler_maruyama, exact_gaussian_sample
from .linalg import check_assumptions, kalman_gain, matrix_exp, noise_covariance, solve_riccati
from .objectives import (
    ParamSpace,
    adjusted_whittle_objective,
    qmle_objective,
    whittle_objective,
)
from .optimize import EstimationResult, minimize
from .sampled import ContinuousModel, SampledModel, build_sampled
from .spectral import periodogram, sample_autocovariance, spectral_density
from .study import StudyConfig, run_study
from .zoo import FAMILIES, get_family

__version__ = "0.1.0"
