"""Continuous-time state space model and its discrete-time sampled form."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError
from .linalg import (
    as_matrix,
    check_assumptions,
    kalman_gain,
    matrix_exp,
    noise_covariance,
    solve_riccati,
)


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    """``dX = A X dt + B dL``, ``Y = C X`` with ``Cov(L_1) = sigma_L``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sigma_L: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        S = as_matrix(self.sigma_L, "sigma_L")
        N = A.shape[0]
        if A.shape != (N, N) or B.shape[0] != N or C.shape[1] != N or S.shape != (B.shape[1],) * 2:
            raise InvalidInputError(
                f"inconsistent shapes: A {A.shape}, B {B.shape}, C {C.shape}, sigma_L {S.shape}")
        for name, val in (("A", A), ("B", B), ("C", C), ("sigma_L", S)):
            object.__setattr__(self, name, val)

    @property
    def N(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.C.shape[0]

    @property
    def d(self):
        return self.B.shape[1]

    def check(self, delta):
        return check_assumptions(self.A, self.C, self.sigma_L, delta)

    def validate(self, delta):
        report = self.check(delta)
        if not report.ok:
            raise InvalidParameterError("; ".join(report.failures()),
                                        assumption=report.failures()[0].split(":")[0])
        return report


@dataclass(frozen=True, eq=False)
class SampledModel:
    """Discrete-time objects of a model observed at spacing ``delta``.

    The innovation fields (``omega``, ``K``, ``V``, ``F``) are ``None`` when the
    model was built with ``innovations=False``; the spectral density only needs
    ``eAD`` and ``sigma_N``.
    """

    model: ContinuousModel
    delta: float
    eAD: np.ndarray
    sigma_N: np.ndarray
    omega: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    filter_radius: Optional[float] = None

    @property
    def C(self):
        return self.model.C

    @property
    def m(self):
        return self.model.m

    @property
    def N(self):
        return self.model.N

    def require_innovations(self):
        if self.K is None:
            raise InvalidInputError("sampled model was built without innovation quantities")


def build_sampled(model, delta, innovations=True):
    """Assemble ``e^{A delta}``, the noise covariance and, optionally, the
    Riccati solution, Kalman gain, innovation covariance ``V = C Omega C^T``
    and the filter transition ``F = e^{A delta} - K C``."""
    if not np.isfinite(delta) or delta <= 0:
        raise InvalidInputError(f"delta must be > 0, got {delta}")
    eAD = matrix_exp(model.A, delta)
    sigma_N = noise_covariance(model.A, model.B, model.sigma_L, delta)
    if not innovations:
        return SampledModel(model, float(delta), eAD, sigma_N)
    C = model.C
    omega = solve_riccati(eAD, sigma_N, C)
    K, rho = kalman_gain(eAD, omega, C)
    V = C @ omega @ C.T
    V = (V + V.T) / 2
    return SampledModel(model, float(delta), eAD, sigma_N, omega, K, V, eAD - K @ C, rho)


def _as_points(z):
    z = np.asarray(z, dtype=complex)
    return z.reshape(-1), z.shape


def phi_batch(sm, z):
    """``Phi(z) = C (I - eAD z)^{-1}`` for every point of ``z``; shape ``(..., m, N)``."""
    pts, shape = _as_points(z)
    N = sm.N
    I = np.eye(N)
    # Phi(z)^T = (I - eAD^T z)^{-1} C^T
    lhs = I[None] - pts[:, None, None] * sm.eAD.T[None]
    rhs = np.broadcast_to(sm.C.T.astype(complex), (len(pts), N, sm.m))
    out = np.linalg.solve(lhs, rhs).transpose(0, 2, 1)
    return out.reshape(shape + (sm.m, N))


def transfer_phi(sm, z):
    """Transfer function ``Phi(z) = sum_j C eAD^j z^j`` at a point with ``|z| = 1``."""
    z = complex(z)
    if abs(abs(z) - 1.0) > 1e-10:
        raise InvalidInputError(f"|z| must be 1, got {abs(z)}")
    return phi_batch(sm, z)


def pi_batch(sm, z):
    """``Pi(z) = I_m - C (I_N - F z)^{-1} K z`` for every point of ``z``."""
    sm.require_innovations()
    pts, shape = _as_points(z)
    N, m = sm.N, sm.m
    lhs = np.eye(N)[None] - pts[:, None, None] * sm.F[None]
    rhs = pts[:, None, None] * sm.K[None].astype(complex)
    X = np.linalg.solve(lhs, rhs)
    out = np.eye(m)[None] - sm.C[None] @ X
    return out.reshape(shape + (m, m))


def pi_polynomial(sm, z):
    """Innovation filter ``Pi(z)`` at a point with ``|z| <= 1``."""
    z = complex(z)
    if abs(z) > 1 + 1e-12:
        raise InvalidInputError(f"|z| must be <= 1, got {abs(z)}")
    return pi_batch(sm, z)


def pi_inverse_batch(sm, z):
    """``Pi^{-1}(z) = I + C (I - eAD z)^{-1} K z``, the closed form of the
    moving average series ``I + C sum_{j>=1} eAD^{j-1} K z^j``."""
    sm.require_innovations()
    pts, shape = _as_points(z)
    N, m = sm.N, sm.m
    lhs = np.eye(N)[None] - pts[:, None, None] * sm.eAD[None]
    rhs = pts[:, None, None] * sm.K[None].astype(complex)
    out = np.eye(m)[None] + sm.C[None] @ np.linalg.solve(lhs, rhs)
    return out.reshape(shape + (m, m))
