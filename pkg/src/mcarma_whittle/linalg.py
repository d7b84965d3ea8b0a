"""Dense matrix kernels: exponential, sampled noise covariance, filtering
Riccati equation, Kalman gain and the spectrum checks on the drift matrix.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    ConvergenceError,
    DegeneracyError,
    InvalidInputError,
    InvertibilityError,
)

STABILITY_MARGIN = 1e-12
CONDITION_LIMIT = 1e12


def as_matrix(a, name="matrix", ndim=2):
    """Return ``a`` as a finite float array with ``ndim`` dimensions."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0 and ndim == 2:
        arr = arr.reshape(1, 1)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def _square(a, name):
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise InvalidInputError(f"{name} must be square, got shape {arr.shape}")
    return arr


def is_symmetric_pd(S, rtol=1e-10):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        return False
    if not np.allclose(S, S.T, rtol=rtol, atol=rtol * max(1.0, np.abs(S).max())):
        return False
    try:
        np.linalg.cholesky((S + S.T) / 2)
    except np.linalg.LinAlgError:
        return False
    return True


def matrix_exp(A, t=1.0):
    """Matrix exponential ``exp(A t)``.

    Scaling and squaring with a degree-13 Pade approximant (``scipy.linalg.expm``).
    """
    A = _square(A, "A")
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError(f"t must be finite and >= 0, got {t}")
    return scipy.linalg.expm(A * t)


def noise_covariance(A, B, Sigma_L, delta):
    r"""Covariance of the sampled noise ``N_k``.

    Computes :math:`\int_0^\Delta e^{Au} B \Sigma_L B^T e^{A^T u}\,du` exactly (up to
    the exponential's rounding) through the exponential of the block matrix
    ``[[A, B Sigma_L B^T], [0, -A^T]] * delta``.

    Parameters
    ----------
    A : (N, N) array_like
    B : (N, d) array_like
    Sigma_L : (d, d) array_like
        Symmetric positive definite covariance of the driving process at unit time.
    delta : float
        Sampling distance, > 0.

    Returns
    -------
    (N, N) ndarray
        Symmetric positive semidefinite matrix.
    """
    A = _square(A, "A")
    B = as_matrix(B, "B")
    Sigma_L = _square(Sigma_L, "Sigma_L")
    n = A.shape[0]
    if B.shape[0] != n or B.shape[1] != Sigma_L.shape[0]:
        raise InvalidInputError(
            f"shape mismatch: A {A.shape}, B {B.shape}, Sigma_L {Sigma_L.shape}")
    if not is_symmetric_pd(Sigma_L):
        raise InvalidInputError("Sigma_L must be symmetric positive definite")
    if not np.isfinite(delta) or delta <= 0:
        raise InvalidInputError(f"delta must be > 0, got {delta}")
    Q = B @ Sigma_L @ B.T
    Q = (Q + Q.T) / 2
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = A
    M[:n, n:] = Q
    M[n:, n:] = -A.T
    E = scipy.linalg.expm(M * delta)
    # E[:n, n:] = int_0^delta e^{A(delta-s)} Q e^{-A^T s} ds
    S = E[:n, n:] @ E[:n, :n].T
    return (S + S.T) / 2


def stationary_covariance(eAD, Sigma_N):
    """Stationary state covariance of ``X_k = eAD X_{k-1} + N_k``.

    Solves the discrete Lyapunov equation ``P = eAD P eAD^T + Sigma_N``.
    """
    P = scipy.linalg.solve_discrete_lyapunov(np.asarray(eAD, float), np.asarray(Sigma_N, float))
    return (P + P.T) / 2


def _riccati_map(eAD, Sigma_N, C, Omega):
    G = eAD @ Omega @ C.T
    V = C @ Omega @ C.T
    nxt = eAD @ Omega @ eAD.T + Sigma_N - G @ np.linalg.solve(V, G.T)
    return (nxt + nxt.T) / 2


def riccati_residual(eAD, Sigma_N, C, Omega):
    """Frobenius norm of the Riccati equation residual at ``Omega``."""
    eAD, Sigma_N, C, Omega = (np.asarray(x, float) for x in (eAD, Sigma_N, C, Omega))
    return float(np.linalg.norm(_riccati_map(eAD, Sigma_N, C, Omega) - Omega))


def solve_riccati(eAD, Sigma_N, C, tol=1e-12, max_iter=100_000):
    """Positive semidefinite solution of the filtering Riccati equation.

    Fixed-point iteration of

        Omega = eAD Omega eAD^T + Sigma_N
                - (eAD Omega C^T)(C Omega C^T)^{-1}(eAD Omega C^T)^T

    started at ``Sigma_N``.  Iteration stops once successive iterates differ by
    less than ``tol * max(1, ||Omega||_F)`` in Frobenius norm.

    Raises
    ------
    ConvergenceError
        Budget exhausted; carries the last residual.
    DegeneracyError
        ``C Omega C^T`` numerically singular.
    """
    eAD = _square(eAD, "eAD")
    Sigma_N = _square(Sigma_N, "Sigma_N")
    C = as_matrix(C, "C")
    if C.shape[1] != eAD.shape[0] or Sigma_N.shape != eAD.shape:
        raise InvalidInputError(
            f"shape mismatch: eAD {eAD.shape}, Sigma_N {Sigma_N.shape}, C {C.shape}")
    Omega = (Sigma_N + Sigma_N.T) / 2
    step = np.inf
    for it in range(1, max_iter + 1):
        V = C @ Omega @ C.T
        if np.linalg.cond(V) > CONDITION_LIMIT:
            raise DegeneracyError("C Omega C^T is numerically singular")
        nxt = _riccati_map(eAD, Sigma_N, C, Omega)
        step = np.linalg.norm(nxt - Omega)
        Omega = nxt
        if step <= tol * max(1.0, np.linalg.norm(Omega)):
            break
    else:
        raise ConvergenceError(
            f"Riccati iteration did not converge in {max_iter} iterations",
            residual=riccati_residual(eAD, Sigma_N, C, Omega), iterations=max_iter)
    if np.linalg.cond(C @ Omega @ C.T) > CONDITION_LIMIT:
        raise DegeneracyError("C Omega C^T is numerically singular")
    return Omega


def kalman_gain(eAD, Omega, C):
    """Kalman gain ``K = (eAD Omega C^T)(C Omega C^T)^{-1}``.

    Returns
    -------
    K : (N, m) ndarray
    rho : float
        Spectral radius of ``eAD - K C``; always < 1 on return.
    """
    eAD = _square(eAD, "eAD")
    Omega = _square(Omega, "Omega")
    C = as_matrix(C, "C")
    V = C @ Omega @ C.T
    if np.linalg.cond(V) > CONDITION_LIMIT:
        raise DegeneracyError("C Omega C^T is numerically singular")
    G = eAD @ Omega @ C.T
    K = np.linalg.solve(V, G.T).T
    rho = float(np.max(np.abs(np.linalg.eigvals(eAD - K @ C))))
    if rho >= 1.0:
        raise InvertibilityError(
            f"eAD - K C has spectral radius {rho:.6g} >= 1", spectral_radius=rho)
    return K, rho


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    stable: bool
    strip_ok: bool
    c_full_rank: bool
    sigma_l_pd: bool

    @property
    def ok(self):
        return self.stable and self.strip_ok and self.c_full_rank and self.sigma_l_pd

    def failures(self):
        names = {
            "stable": "A3: eigenvalues of A must have strictly negative real parts",
            "strip_ok": "A7: |Im(eigenvalue)| must be < pi/delta",
            "c_full_rank": "A4: C must have full rank",
            "sigma_l_pd": "A2: Sigma_L must be positive definite",
        }
        return [msg for key, msg in names.items() if not getattr(self, key)]


def check_assumptions(A, C, Sigma_L, delta):
    """Evaluate the stability, strip, rank and covariance conditions."""
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    eig = np.linalg.eigvals(A) if np.all(np.isfinite(A)) else np.array([np.nan + 0j])
    stable = bool(np.all(eig.real < -STABILITY_MARGIN))
    strip_ok = bool(np.all(np.abs(eig.imag) < np.pi / delta))
    c_full_rank = bool(np.linalg.matrix_rank(C) == min(C.shape))
    return SpectrumReport(
        eigenvalues=eig,
        stable=stable,
        strip_ok=strip_ok,
        c_full_rank=c_full_rank,
        sigma_l_pd=is_symmetric_pd(Sigma_L),
    )
