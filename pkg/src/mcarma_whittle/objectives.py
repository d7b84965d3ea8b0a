"""Whittle, adjusted Whittle and quasi maximum likelihood objectives.

All objectives return ``+inf`` when the model cannot be assembled at a
parameter (invalid covariance, singular innovation covariance, unstable
filter...).  The optimizer treats that value as "outside the feasible set",
which keeps the search total over the parameter box.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .exceptions import (
    InvalidInputError,
    MCARMAError,
    NumericIntegrityError,
    UnsupportedDimensionError,
)
from .sampled import build_sampled, pi_batch
from .spectral import observations, spectral_density_grid

log = logging.getLogger(__name__)

IMAG_GUARD = 1e-8
LOG_2PI = np.log(2 * np.pi)


@dataclass(eq=False)
class ParamSpace:
    """Box ``[lower, upper]`` together with the map ``theta -> ContinuousModel``.

    Sampled models are cached per parameter vector (keyed on its bytes), so
    repeated evaluations during a search do not rebuild them.
    """

    lower: np.ndarray
    upper: np.ndarray
    builder: Callable
    delta: float = 1.0
    cache_size: int = 256
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise InvalidInputError("lower and upper bounds must have the same length")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise InvalidInputError("bounds must be finite")
        if np.any(self.lower >= self.upper):
            raise InvalidInputError("each lower bound must be below its upper bound")
        if not self.delta > 0:
            raise InvalidInputError(f"delta must be > 0, got {self.delta}")

    @classmethod
    def from_family(cls, family, delta=1.0, lower=None, upper=None):
        from .zoo import get_family
        fam = get_family(family) if isinstance(family, str) else family
        lo = fam.lower if lower is None else lower
        hi = fam.upper if upper is None else upper
        return cls(lo, hi, fam.builder, float(delta))

    @property
    def r(self):
        return self.lower.size

    def contains(self, theta):
        t = np.asarray(theta, dtype=float)
        return t.shape == self.lower.shape and bool(np.all((t >= self.lower) & (t <= self.upper)))

    def clip(self, theta):
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def check(self, theta):
        t = np.asarray(theta, dtype=float).reshape(-1)
        if t.size != self.r:
            raise InvalidInputError(f"expected {self.r} parameters, got {t.size}")
        if not self.contains(t):
            raise InvalidInputError(f"theta {t.tolist()} lies outside the parameter box")
        return t

    def model(self, theta):
        return self.builder(self.check(theta))

    def sampled(self, theta, innovations=True):
        """Validated :class:`SampledModel` at ``theta`` (cached)."""
        t = self.check(theta)
        key = (t.tobytes(), bool(innovations))
        sm = self._cache.get(key)
        if sm is None:
            model = self.builder(t)
            model.validate(self.delta)
            sm = build_sampled(model, self.delta, innovations=innovations)
            if len(self._cache) >= self.cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = sm
        return sm

    def try_sampled(self, theta, innovations=True):
        """Like :meth:`sampled` but returns ``None`` at infeasible parameters."""
        try:
            return self.sampled(theta, innovations)
        except MCARMAError as exc:
            log.debug("infeasible theta %s: %s", np.asarray(theta).tolist(), exc)
            return None
        except np.linalg.LinAlgError as exc:
            log.debug("linear algebra failure at theta %s: %s", np.asarray(theta).tolist(), exc)
            return None


def _real(z, what):
    z = complex(z)
    if abs(z.imag) > IMAG_GUARD * max(1.0, abs(z.real)):
        raise NumericIntegrityError(f"{what} has imaginary residual {z.imag:.3g}")
    return z.real


def whittle_value(f, I):
    """``(1/2n) sum_j [tr(f_j^{-1} I_j) + log det f_j]`` for stacked ``(2n, m, m)`` arrays.

    Returns ``inf`` if some ``f_j`` is not positive definite.
    """
    n2, m, _ = f.shape
    if m == 1:
        fr = f[:, 0, 0].real
        if np.any(fr <= 0):
            return np.inf
        quad = np.sum(I[:, 0, 0] / fr)
        return _real(quad, "tr(f^-1 I)") / n2 + np.sum(np.log(fr)) / n2
    try:
        L = np.linalg.cholesky(f)
    except np.linalg.LinAlgError:
        return np.inf
    logdet = 2 * np.sum(np.log(np.abs(np.diagonal(L, axis1=1, axis2=2))))
    quad = np.trace(np.linalg.solve(f, I), axis1=1, axis2=2).sum()
    return (_real(quad, "tr(f^-1 I)") + logdet) / n2


def whittle_objective(grid, theta, space):
    r"""Whittle function

    .. math:: W_n(\theta) = \frac{1}{2n} \sum_{j=-n+1}^{n}
              \Big[\operatorname{tr}\big(f(\omega_j,\theta)^{-1} I_n(\omega_j)\big)
              + \log\det f(\omega_j,\theta)\Big]
    """
    sm = space.try_sampled(theta, innovations=False)
    if sm is None:
        return np.inf
    if sm.m != grid.m:
        raise InvalidInputError(f"model output dimension {sm.m} != data dimension {grid.m}")
    f = spectral_density_grid(sm, grid.frequencies)
    return float(whittle_value(f, grid.values))


def _require_univariate(sm):
    if sm.m != 1 or sm.model.d != 1:
        raise UnsupportedDimensionError(
            f"adjusted Whittle needs m = d = 1, got m = {sm.m}, d = {sm.model.d}")


def adjusted_whittle_objective(grid, theta, space):
    r"""Adjusted Whittle function
    :math:`W_n^{(A)}(\theta) = \frac{\pi}{n}\sum_j |\Pi(e^{i\omega_j},\theta)|^2 I_n(\omega_j)`.

    It does not involve the driver variance, so only the drift and moving
    average coefficients are identified.
    """
    if grid.m != 1:
        raise UnsupportedDimensionError(f"adjusted Whittle needs m = 1, got m = {grid.m}")
    sm = space.try_sampled(theta, innovations=True)
    if sm is None:
        return np.inf
    _require_univariate(sm)
    p = pi_batch(sm, np.exp(1j * grid.frequencies))[:, 0, 0]
    val = np.sum(np.abs(p) ** 2 * grid.values[:, 0, 0]) * np.pi / grid.n
    return float(_real(val, "adjusted Whittle sum"))


@numba.njit(cache=True)
def _filter_kernel(F, K, C, Y):
    n, m = Y.shape
    N = F.shape[0]
    x = np.zeros(N)
    nxt = np.zeros(N)
    xi = np.empty((n, m))
    for k in range(n):
        for i in range(m):
            acc = 0.0
            for j in range(N):
                acc += C[i, j] * x[j]
            xi[k, i] = Y[k, i] - acc
        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc += F[i, j] * x[j]
            for j in range(m):
                acc += K[i, j] * Y[k, j]
            nxt[i] = acc
        for i in range(N):
            x[i] = nxt[i]
    return xi


def pseudo_innovations(sm, Y):
    """``xi_k = Y_k - C xhat_k`` with ``xhat_{k+1} = F xhat_k + K Y_k`` and ``xhat_1 = 0``."""
    sm.require_innovations()
    Y = np.ascontiguousarray(observations(Y))
    return _filter_kernel(sm.F, sm.K, np.ascontiguousarray(sm.C), Y)


def qmle_objective(path, theta, space):
    r"""Empirical counterpart of the Gaussian quasi log-likelihood limit

    .. math:: \frac{1}{n}\sum_{k=1}^n \xi_k^\top V^{-1} \xi_k + \log\det V - m \log 2\pi

    The constant uses the same sign as the population function it estimates,
    which makes it equal to the Whittle limit at every parameter.
    """
    Y = observations(path)
    sm = space.try_sampled(theta, innovations=True)
    if sm is None:
        return np.inf
    if sm.m != Y.shape[1]:
        raise InvalidInputError(f"model output dimension {sm.m} != data dimension {Y.shape[1]}")
    try:
        L = np.linalg.cholesky(sm.V)
    except np.linalg.LinAlgError:
        return np.inf
    xi = pseudo_innovations(sm, Y)
    z = np.linalg.solve(L, xi.T)
    logdet = 2 * np.sum(np.log(np.diag(L)))
    return float(np.sum(z * z) / Y.shape[0] + logdet - sm.m * LOG_2PI)


OBJECTIVES = {
    "whittle": whittle_objective,
    "adjusted": adjusted_whittle_objective,
    "qmle": qmle_objective,
}
