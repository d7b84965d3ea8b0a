"""Echelon-form parametrizations used in the simulation study.

Each family maps a parameter vector to a :class:`ContinuousModel`.  Families
with a univariate output keep the driver variance fixed at one, so their
parameter vectors only carry the drift and moving-average coefficients.
"""

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError
from .linalg import is_symmetric_pd
from .sampled import ContinuousModel, build_sampled
from .spectral import spectral_density_grid

_EPS = 1e-6


def _theta(theta, r):
    t = np.asarray(theta, dtype=float).reshape(-1)
    if t.shape != (r,):
        raise InvalidInputError(f"expected {r} parameters, got {t.size}")
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("parameters must be finite")
    return t


def _sigma(a, b, c):
    S = np.array([[a, b], [b, c]])
    if not is_symmetric_pd(S):
        raise InvalidParameterError(
            f"Sigma_L = [[{a}, {b}], [{b}, {c}]] is not positive definite", assumption="A2")
    return S


def build_mcarma21_biv(theta):
    """Bivariate MCARMA(2,1): N = 3, m = d = 2, ten parameters."""
    t = _theta(theta, 10)
    A = np.array([[t[0], t[1], 0.0],
                  [0.0, 0.0, 1.0],
                  [t[2], t[3], t[4]]])
    B = np.array([[t[0], t[1]],
                  [t[5], t[6]],
                  [t[2] + t[4] * t[5], t[5] + t[4] * t[6]]])
    C = np.array([[1.0, 0.0, 0.0],
                  [0.0, 1.0, 0.0]])
    return ContinuousModel(A, B, C, _sigma(t[7], t[8], t[9]))


def build_mcar1_biv(theta):
    """Bivariate MCAR(1) (Ornstein-Uhlenbeck): ``A = B``, ``C = I``, seven parameters."""
    t = _theta(theta, 7)
    A = np.array([[t[0], t[1]], [t[2], t[3]]])
    return ContinuousModel(A, A.copy(), np.eye(2), _sigma(t[4], t[5], t[6]))


def build_carma21(theta):
    """Univariate CARMA(2,1) with unit driver variance."""
    t = _theta(theta, 3)
    A = np.array([[0.0, 1.0], [t[0], t[1]]])
    B = np.array([[t[2]], [t[0] + t[1] * t[2]]])
    return ContinuousModel(A, B, np.array([[1.0, 0.0]]), np.eye(1))


def build_car3(theta):
    """Univariate CAR(3) in companion form with ``B = (0, 0, theta_1)^T``."""
    t = _theta(theta, 3)
    if t[0] == 0:
        raise InvalidParameterError("theta_1 = 0 gives B = 0 and a degenerate noise covariance",
                                    assumption="A5")
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [t[0], t[1], t[2]]])
    B = np.array([[0.0], [0.0], [t[0]]])
    return ContinuousModel(A, B, np.array([[1.0, 0.0, 0.0]]), np.eye(1))


def build_car1(theta):
    """Univariate CAR(1): ``A = theta``, ``B = C = 1``, unit driver variance."""
    t = _theta(theta, 1)
    return ContinuousModel(t.reshape(1, 1), np.ones((1, 1)), np.ones((1, 1)), np.eye(1))


@dataclass(frozen=True, eq=False)
class ModelFamily:
    name: str
    r: int
    dims: Tuple[int, int, int]  # (N, m, d)
    default_theta0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    builder: Callable

    def build(self, theta):
        return self.builder(theta)

    @property
    def bounds(self):
        return self.lower, self.upper


def _box(theta0, neg=(), pos=()):
    theta0 = np.asarray(theta0, dtype=float)
    lo, hi = theta0 - 5.0, theta0 + 5.0
    for i in neg:
        hi[i] = min(hi[i], -_EPS)
    for i in pos:
        lo[i] = max(lo[i], _EPS)
    return lo, hi


def _family(name, theta0, dims, builder, neg=(), pos=()):
    theta0 = np.asarray(theta0, dtype=float)
    lo, hi = _box(theta0, neg, pos)
    return ModelFamily(name, len(theta0), dims, theta0, lo, hi, builder)


THETA0_MCARMA21 = (-1, -2, 1, -2, -3, 1, 2, 0.4751, -0.1622, 0.3708)
THETA0_CARMA21 = (-2, -2, -1)
THETA0_MCAR1 = (1, -2, 3, -4, 0.7513, -0.3536, 0.3536)
THETA0_MCAR1_NEAR_UNIT_ROOT = (-0.01, 0, 7, -1, 0.7513, -0.3536, 0.3536)
THETA0_CAR3 = (-6, -11, -6)

FAMILIES = {
    "mcarma21_biv": _family("mcarma21_biv", THETA0_MCARMA21, (3, 2, 2), build_mcarma21_biv,
                            pos=(7, 9)),
    "mcar1_biv": _family("mcar1_biv", THETA0_MCAR1, (2, 2, 2), build_mcar1_biv, pos=(4, 6)),
    "carma21": _family("carma21", THETA0_CARMA21, (2, 1, 1), build_carma21, neg=(0, 1)),
    "car3": _family("car3", THETA0_CAR3, (3, 1, 1), build_car3, neg=(0, 1, 2)),
    "car1": _family("car1", (-1.0,), (1, 1, 1), build_car1, neg=(0,)),
}


def get_family(name):
    key = str(name).strip().lower()
    if key not in FAMILIES:
        raise InvalidInputError(f"unknown model family {name!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[key]


def nig_driver_theta1():
    """NIG driver of the bivariate MCARMA(2,1) study; its covariance matches
    ``Sigma_L`` of the default parameter up to four decimals."""
    from .levy import LevySpec
    return LevySpec.nig(3.0, [1.0, 1.0], 1.0, [[1.25, -0.5], [-0.5, 1.0]])


def identifiability_probe(family, theta1, theta2, delta=1.0, n_freq=512):
    """Largest entrywise gap between the spectral densities at two parameters.

    A gap near zero flags a pair the sampled spectrum cannot tell apart.
    Advisory only: it inspects ``n_freq`` frequencies, not the whole interval.
    """
    fam = get_family(family) if isinstance(family, str) else family
    w = np.linspace(-np.pi, np.pi, n_freq)
    f1 = spectral_density_grid(build_sampled(fam.build(theta1), delta, innovations=False), w)
    f2 = spectral_density_grid(build_sampled(fam.build(theta2), delta, innovations=False), w)
    return float(np.max(np.abs(f1 - f2)))


def default_driver(family, kind="brownian", sigma_L=None):
    """Driver used by the CLI and the study harness.

    Brownian drivers take ``sigma_L`` (default: the family's model at its
    reference parameter).  For NIG, the bivariate MCARMA(2,1) family uses the
    parameters of its simulation study; other families use the symmetric NIG
    law with covariance ``sigma_L`` (``beta = 0``, ``delta = alpha = 1``).
    """
    from .levy import LevySpec
    fam = get_family(family) if isinstance(family, str) else family
    if sigma_L is None:
        sigma_L = fam.build(fam.default_theta0).sigma_L
    kind = str(kind).lower()
    if kind == "brownian":
        return LevySpec.brownian(sigma_L)
    if kind == "nig":
        if fam.name == "mcarma21_biv":
            return nig_driver_theta1()
        return LevySpec.nig_with_covariance(sigma_L, alpha=1.0)
    raise InvalidInputError(f"unknown driver {kind!r}; choose brownian or nig")
