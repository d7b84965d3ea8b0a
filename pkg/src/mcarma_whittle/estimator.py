"""scikit-learn style front-end to the three estimators."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import asymptotics
from .exceptions import InvalidInputError
from .levy import SamplePath
from .objectives import (
    ParamSpace,
    adjusted_whittle_objective,
    pseudo_innovations,
    qmle_objective,
    whittle_objective,
)
from .optimize import ADJUSTED, QMLE, WHITTLE, minimize, perturbed_starts
from .spectral import periodogram
from .zoo import default_driver, get_family

_KINDS = {"whittle": WHITTLE, "adjusted": ADJUSTED, "adjustedwhittle": ADJUSTED, "qmle": QMLE}


def estimator_kind(name):
    key = str(name).replace("_", "").replace("-", "").replace(" ", "").lower()
    if key not in _KINDS:
        raise InvalidInputError(f"unknown estimator {name!r}; choose whittle, adjusted or qmle")
    return _KINDS[key]


def validate_observations(X, min_samples=2):
    """``(n, m)`` float array from a :class:`SamplePath`, a 1-d series or a 2-d array."""
    if isinstance(X, SamplePath):
        X = X.observations
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    try:
        return check_array(X, ensure_min_samples=min_samples, dtype=float)
    except ValueError as exc:
        raise InvalidInputError(str(exc)) from None


def objective_for(kind, data, space):
    """Return ``theta -> objective`` for estimator ``kind`` on observations ``data``."""
    kind = estimator_kind(kind)
    if kind == QMLE:
        return lambda th: qmle_objective(data, th, space)
    grid = periodogram(data)
    if kind == ADJUSTED:
        return lambda th: adjusted_whittle_objective(grid, th, space)
    return lambda th: whittle_objective(grid, th, space)


class WhittleEstimator(BaseEstimator, TransformerMixin):
    """Parametric estimator for a sampled MCARMA model family.

    Parameters
    ----------
    family : str
        Model family name (see ``mcarma_whittle.zoo.FAMILIES``).
    method : {'whittle', 'adjusted', 'qmle'}
    delta : float
        Sampling distance of the observations.
    theta_init : array-like, optional
        Start of the search; defaults to the family's reference parameter.
    n_starts : int
        Number of starts: ``theta_init`` plus ``n_starts - 1`` perturbed copies.
    tol : float
        Simplex diameter and value spread at convergence.
    random_state : int
        Seed for the perturbed starts.
    lower, upper : array-like, optional
        Override the family's parameter box.

    Attributes
    ----------
    theta_ : ndarray
    result_ : EstimationResult
    objective_value_ : float
    converged_ : bool
    n_obs_ : int
    """

    def __init__(self, family="carma21", method="whittle", delta=1.0, theta_init=None,
                 n_starts=5, tol=1e-8, random_state=0, lower=None, upper=None):
        self.family = family
        self.method = method
        self.delta = delta
        self.theta_init = theta_init
        self.n_starts = n_starts
        self.tol = tol
        self.random_state = random_state
        self.lower = lower
        self.upper = upper

    def _space(self):
        return ParamSpace.from_family(self.family, self.delta, self.lower, self.upper)

    def fit(self, X, y=None):
        Y = validate_observations(X)
        fam = get_family(self.family)
        if Y.shape[1] != fam.dims[1]:
            raise InvalidInputError(
                f"family {fam.name} has {fam.dims[1]} outputs, data has {Y.shape[1]} columns")
        if int(self.n_starts) < 1:
            raise InvalidInputError("n_starts must be >= 1")
        space = self._space()
        start = fam.default_theta0 if self.theta_init is None else self.theta_init
        start = np.asarray(start, dtype=float).reshape(-1)
        if start.size != space.r:
            raise InvalidInputError(f"theta_init needs {space.r} entries, got {start.size}")
        starts = perturbed_starts(start, space, int(self.n_starts), seed=self.random_state)
        kind = estimator_kind(self.method)
        res = minimize(objective_for(kind, Y, space), space, starts, tol=self.tol, kind=kind)
        self.space_ = space
        self.result_ = res
        self.theta_ = res.theta_hat
        self.objective_value_ = res.objective_value
        self.converged_ = res.converged
        self.n_obs_ = Y.shape[0]
        self.n_features_in_ = Y.shape[1]
        return self

    def _sampled(self):
        check_is_fitted(self, "theta_")
        return self.space_.sampled(self.theta_, innovations=True)

    def transform(self, X):
        """Pseudo-innovations ``xi_k`` of ``X`` under the fitted parameter."""
        Y = validate_observations(X, min_samples=1)
        return pseudo_innovations(self._sampled(), Y)

    def predict(self, X):
        """One-step-ahead linear predictions ``Y_k - xi_k``."""
        Y = validate_observations(X, min_samples=1)
        return Y - pseudo_innovations(self._sampled(), Y)

    def score(self, X, y=None):
        """Negative objective value of ``X`` at the fitted parameter (higher is better)."""
        check_is_fitted(self, "theta_")
        Y = validate_observations(X)
        return -float(objective_for(self.method, Y, self.space_)(self.theta_))

    def asymptotic_covariance(self, driver=None, mc_samples=10**6, seed=0):
        """Analytic limit covariance of ``sqrt(n)(theta_hat - theta0)`` at the estimate.

        ``driver`` defaults to a Brownian motion with the model's driver
        covariance.  The Whittle formula is used for QMLE too; both estimators
        share it under Gaussian drivers.
        """
        sm = self._sampled()
        driver = driver if driver is not None else default_driver(self.family, "brownian",
                                                                   sm.model.sigma_L)
        method = asymptotics.GAUSSIAN_ANALYTIC if driver.is_gaussian else asymptotics.MONTE_CARLO
        fm = asymptotics.fourth_moment(sm, driver, method, mc_samples=mc_samples, seed=seed)
        if estimator_kind(self.method) == ADJUSTED:
            return asymptotics.sigma_W_adjusted(self.space_, self.theta_, fm)
        return asymptotics.sigma_W(self.space_, self.theta_, fm).sigma_W

    def confidence_intervals(self, level=0.95, driver=None, cov=None, **kwargs):
        """``(r, 2)`` array of asymptotic confidence limits around ``theta_``."""
        check_is_fitted(self, "theta_")
        cov = self.asymptotic_covariance(driver, **kwargs) if cov is None else cov
        return asymptotics.confidence_intervals(self.result_, cov, self.n_obs_, level)
