"""Limit covariance matrices of the Whittle and adjusted Whittle estimators.

Frequency integrals use the composite trapezoid rule on the periodic grid
``omega_k = -pi + 2 pi k / M`` (``M = 4096`` by default), which is spectrally
accurate for the smooth periodic integrands involved.  Parameter gradients of
the spectral density and of ``|Pi|^2`` are central finite differences.

Non-Gaussian drivers enter through the fourth moment of the sampled noise
``N_1``.  The correction kernel used throughout is the fourth cumulant

    E[N N^T (x) N N^T] - Sigma (x) Sigma - vec(Sigma) vec(Sigma)^T - K (Sigma (x) Sigma)

(``K`` the commutation matrix).  For ``N = 1`` this is ``E[N^4] - 3 Sigma^2``;
for larger state dimension it is the only kernel that vanishes for Gaussian
noise.  ``kernel="moment"`` selects ``E[...] - 3 Sigma (x) Sigma`` instead.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.stats

from .exceptions import (
    BoundaryError,
    IdentifiabilityError,
    InsufficientSamplesError,
    InvalidInputError,
    NumericIntegrityError,
    RangeError,
    UnsupportedDimensionError,
    UnsupportedDriverError,
)
from .levy import make_rng, sample_increments
from .linalg import matrix_exp
from .sampled import phi_batch, pi_batch
from .spectral import spectral_density_grid

DEFAULT_NODES = 4096
FD_REL_STEP = 1e-6
IMAG_GUARD = 1e-8
GAUSSIAN_ANALYTIC = "GaussianAnalytic"
MONTE_CARLO = "MonteCarlo"


def quadrature_grid(nodes=DEFAULT_NODES):
    """Periodic trapezoid nodes on ``[-pi, pi)``; the weight of each node is ``2 pi / nodes``."""
    nodes = int(nodes)
    if nodes < 8 or nodes % 2:
        raise InvalidInputError(f"nodes must be an even integer >= 8, got {nodes}")
    return -np.pi + 2 * np.pi * np.arange(nodes) / nodes


def _integrate(values):
    """Trapezoid integral over ``[-pi, pi]`` of samples on :func:`quadrature_grid`."""
    return 2 * np.pi * np.mean(values, axis=0)


def _neg_index(M):
    # -omega_k = omega_{(M - k) mod M} on the periodic grid
    return (-np.arange(M)) % M


def _real_part(z, what, scale=None):
    z = np.asarray(z)
    scale = max(1.0, float(np.max(np.abs(z.real)))) if scale is None else scale
    imag = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if imag > IMAG_GUARD * scale:
        raise NumericIntegrityError(f"{what}: imaginary residual {imag:.3g}")
    return np.ascontiguousarray(z.real) if z.ndim else z.real


def fd_steps(theta):
    theta = np.asarray(theta, dtype=float)
    return FD_REL_STEP * np.maximum(1.0, np.abs(theta))


def _check_interior(space, theta, steps):
    if np.any(theta - steps < space.lower) or np.any(theta + steps > space.upper):
        bad = np.flatnonzero((theta - steps < space.lower) | (theta + steps > space.upper))
        raise BoundaryError(
            f"theta is within one finite-difference step of the boundary in coordinates "
            f"{bad.tolist()}")


def _fd(func, space, theta, steps=None):
    """Central differences of ``func(theta)`` (any array shape) along each coordinate.

    Returns an array with a trailing parameter axis.
    """
    theta = space.check(theta)
    steps = fd_steps(theta) if steps is None else np.asarray(steps, dtype=float)
    _check_interior(space, theta, steps)
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = steps[i]
        cols.append((func(theta + e) - func(theta - e)) / (2 * steps[i]))
    return np.stack(cols, axis=-1)


def _f_on(space, omegas):
    return lambda t: spectral_density_grid(space.sampled(t, innovations=False), omegas)


def grad_spectral_density(space, theta, omega, steps=None):
    """Jacobian of ``vec f(omega, .)`` at ``theta`` (column-major ``vec``).

    ``omega`` may be a scalar (result ``(m^2, r)``) or an array (result
    ``omega.shape + (m^2, r)``).
    """
    w = np.asarray(omega, dtype=float)
    g = _fd(_f_on(space, w.reshape(-1)), space, theta, steps)  # (M, m, m, r)
    M, m = g.shape[0], g.shape[1]
    out = g.transpose(0, 2, 1, 3).reshape(M, m * m, -1)  # row a + m b holds d f[a, b]
    return out.reshape(w.shape + out.shape[1:])


@dataclass(frozen=True, eq=False)
class _Grid:
    omegas: np.ndarray
    f: np.ndarray        # (M, m, m)
    finv: np.ndarray     # (M, m, m)
    df: np.ndarray       # (M, m, m, r)
    phi: np.ndarray      # Phi(e^{i omega}), (M, m, N)


def _spectral_grid(space, theta, nodes, steps=None):
    w = quadrature_grid(nodes)
    sm = space.sampled(theta, innovations=False)
    f = spectral_density_grid(sm, w)
    df = _fd(_f_on(space, w), space, theta, steps)
    return _Grid(w, f, np.linalg.inv(f), df, phi_batch(sm, np.exp(1j * w))), sm


def _check_pd(H, what):
    H = (H + H.T) / 2
    ev = np.linalg.eigvalsh(H)
    if ev[0] < 1e-12 * max(np.trace(H), np.finfo(float).tiny):
        raise IdentifiabilityError(
            f"{what} is not positive definite (smallest eigenvalue {ev[0]:.3g}); the "
            f"parametrization is not locally identifiable at this point (assumption B4)")
    return H


def _hessian_from_grid(g):
    # (1/2pi) int tr(f^-1 d_i f f^-1 d_j f)
    X = np.einsum("kab,kbci->kaci", g.finv, g.df)
    integrand = np.einsum("kabi,kbaj->kij", X, X)
    return _real_part(_integrate(integrand) / (2 * np.pi), "Hessian limit")


def sigma_hessian(space, theta0, nodes=DEFAULT_NODES, steps=None):
    r"""Limit of the Whittle Hessian,

    .. math:: \frac{1}{2\pi}\int_{-\pi}^{\pi} \nabla f(-\omega)^\top
              [f(-\omega)^{-1}\otimes f(\omega)^{-1}] \nabla f(\omega)\,d\omega.

    Raises
    ------
    IdentifiabilityError
        Smallest eigenvalue below ``1e-12 * trace``.
    """
    g, _ = _spectral_grid(space, theta0, nodes, steps)
    return _check_pd(_hessian_from_grid(g), "Hessian limit matrix")


# ----------------------------------------------------------------------------
# fourth moment of the sampled noise


def commutation_matrix(n):
    """``K`` with ``K vec(X) = vec(X^T)`` for ``n x n`` matrices (column-major vec)."""
    K = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            K[i * n + j, j * n + i] = 1.0
    return K


def gaussian_fourth_moment(S):
    """``E[X X^T (x) X X^T]`` for ``X ~ Normal(0, S)``."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    SS = np.kron(S, S)
    v = S.reshape(-1, order="F")
    return SS + np.outer(v, v) + commutation_matrix(n) @ SS


@dataclass(frozen=True, eq=False)
class FourthMomentMatrix:
    """``E[N_1 N_1^T (x) N_1 N_1^T]`` for the sampled noise.

    For ``MonteCarlo`` the second moment ``sigma`` is estimated from the same
    draws, so discretization error of the stochastic integral cancels in the
    cumulant.  ``batch_values``/``batch_sigmas`` hold batch means used to put
    Monte-Carlo standard errors on derived quantities.
    """

    value: np.ndarray
    sigma: np.ndarray
    method: str
    mc_samples: int = 0
    batch_values: Optional[np.ndarray] = None
    batch_sigmas: Optional[np.ndarray] = None

    @property
    def is_gaussian(self):
        return self.method == GAUSSIAN_ANALYTIC

    @staticmethod
    def _kernel(M4, S, kind):
        if kind == "cumulant":
            return M4 - gaussian_fourth_moment(S)
        if kind == "moment":
            return M4 - 3 * np.kron(S, S)
        raise InvalidInputError(f"kernel must be 'cumulant' or 'moment', got {kind!r}")

    def kernel(self, kind="cumulant"):
        return self._kernel(self.value, self.sigma, kind)

    def batch_kernels(self, kind="cumulant"):
        if self.batch_values is None:
            return None
        return np.stack([self._kernel(M, S, kind)
                         for M, S in zip(self.batch_values, self.batch_sigmas)])


def _noise_weights(sm, steps):
    """``e^{A (delta - t_k)} B`` at the left endpoints ``t_k = k delta / steps``."""
    A, B = sm.model.A, sm.model.B
    h = sm.delta / steps
    step = matrix_exp(A, h)
    W = np.empty((steps, sm.N, B.shape[1]))
    W[-1] = matrix_exp(A, h) @ B
    for k in range(steps - 2, -1, -1):
        W[k] = step @ W[k + 1]
    return W


def fourth_moment(sm, spec, method=MONTE_CARLO, mc_samples=10**6, seed=0, fine_steps=1000,
                  batches=20, chunk=2000):
    """Fourth moment of ``N_1 = int_0^delta e^{A(delta-u)} B dL_u``.

    ``GaussianAnalytic`` uses the closed form for normal vectors (Brownian
    drivers only).  ``MonteCarlo`` approximates the integral on ``fine_steps``
    subintervals and averages ``vec(N N^T) vec(N N^T)^T`` over ``mc_samples``
    draws.
    """
    if method == GAUSSIAN_ANALYTIC:
        if not spec.is_gaussian:
            raise UnsupportedDriverError("GaussianAnalytic needs a Brownian driver")
        S = sm.sigma_N
        return FourthMomentMatrix(gaussian_fourth_moment(S), S.copy(), method)
    if method != MONTE_CARLO:
        raise InvalidInputError(f"unknown fourth-moment method {method!r}")
    mc_samples = int(mc_samples)
    if mc_samples < 10**4:
        raise InsufficientSamplesError(f"mc_samples must be >= 10^4, got {mc_samples}")
    if spec.d != sm.model.d:
        raise InvalidInputError(f"driver dimension {spec.d} != model input dimension {sm.model.d}")
    N = sm.N
    W = _noise_weights(sm, fine_steps)
    h = sm.delta / fine_steps
    per_batch = -(-mc_samples // batches)
    bM, bS = [], []
    done = 0
    for b in range(batches):
        size_b = min(per_batch, mc_samples - done)
        if size_b <= 0:
            break
        M4 = np.zeros((N * N, N * N))
        S2 = np.zeros((N, N))
        left = size_b
        c = 0
        while left > 0:
            size = min(chunk, left)
            rng = make_rng(seed, b, 1000 + c)
            dL = sample_increments(spec, h, size * fine_steps, rng).reshape(size, fine_steps, -1)
            Ns = np.einsum("ksd,snd->kn", dL, W)
            x = (Ns[:, :, None] * Ns[:, None, :]).reshape(size, N * N)
            M4 += x.T @ x
            S2 += Ns.T @ Ns
            left -= size
            c += 1
        bM.append(M4 / size_b)
        bS.append(S2 / size_b)
        done += size_b
    bM, bS = np.array(bM), np.array(bS)
    wts = np.array([min(per_batch, mc_samples - i * per_batch) for i in range(len(bM))], float)
    wts /= wts.sum()
    M4 = np.tensordot(wts, bM, axes=1)
    S = np.tensordot(wts, bS, axes=1)
    return FourthMomentMatrix((M4 + M4.T) / 2, (S + S.T) / 2, method, mc_samples, bM, bS)


# ----------------------------------------------------------------------------
# score covariance


def _score_vectors(g):
    """The two frequency integrals of the score correction, as ``(N^2, r)`` real arrays.

    ``right[:, i] = int (Phi(e^{-iw})^T f(-w)^{-1} (x) Phi(e^{iw})^T f(w)^{-1}) vec d_i f(w) dw``
    and ``left`` is the analogous integral with ``w`` replaced by ``-w``.
    """
    neg = _neg_index(len(g.omegas))
    phi_p, phi_m = g.phi, g.phi[neg]           # Phi(e^{iw}), Phi(e^{-iw})
    fi_p, fi_m = g.finv, g.finv[neg]
    df_p, df_m = g.df, g.df[neg]
    # (P (x) Q) vec X = vec(Q X P^T)
    P = np.swapaxes(phi_m, 1, 2) @ fi_m        # Phi(e^{-iw})^T f(-w)^{-1}, (M, N, m)
    Q = np.swapaxes(phi_p, 1, 2) @ fi_p        # Phi(e^{iw})^T f(w)^{-1}
    right = np.einsum("kam,kmli,kbl->kabi", Q, df_p, P)
    left = np.einsum("kam,kmli,kbl->kabi", P, df_m, Q)
    M, N = right.shape[0], right.shape[1]
    right = _integrate(right.transpose(0, 2, 1, 3).reshape(M, N * N, -1))
    left = _integrate(left.transpose(0, 2, 1, 3).reshape(M, N * N, -1))
    return _real_part(left, "score correction integral"), _real_part(right, "score correction integral")


def _contract(left, K, right, scale):
    C = scale * left.T @ K @ right
    return (C + C.T) / 2


@dataclass(frozen=True, eq=False)
class AsymptoticCovariances:
    sigma_hessian: np.ndarray
    sigma_score: np.ndarray
    sigma_W: np.ndarray
    quadrature_nodes: int
    fd_step: np.ndarray
    correction: np.ndarray
    correction_se: Optional[np.ndarray] = None

    def std_errors(self, n):
        """Asymptotic standard errors ``sqrt(Sigma_W[i, i] / n)``."""
        return np.sqrt(np.clip(np.diag(self.sigma_W), 0, None) / n)


def _score_parts(space, theta0, fm, nodes, kernel, steps, check=True):
    g, sm = _spectral_grid(space, theta0, nodes, steps)
    H = _hessian_from_grid(g)
    H = _check_pd(H, "Hessian limit matrix") if check else (H + H.T) / 2
    if fm.value.shape != (sm.N ** 2, sm.N ** 2):
        raise InvalidInputError(
            f"fourth moment is {fm.value.shape}, expected {(sm.N ** 2,) * 2}")
    left, right = _score_vectors(g)
    scale = 1 / (16 * np.pi ** 4)
    corr = _contract(left, fm.kernel(kernel), right, scale)
    se = None
    bk = fm.batch_kernels(kernel)
    if bk is not None and len(bk) > 1:
        reps = np.stack([_contract(left, Kb, right, scale) for Kb in bk])
        se = reps.std(axis=0, ddof=1) / np.sqrt(len(bk))
    return H, corr, se


def sigma_score(space, theta0, fm, nodes=DEFAULT_NODES, kernel="cumulant", steps=None,
                check=True):
    """Limit covariance of ``sqrt(n) grad W_n(theta0)``: ``2 * sigma_hessian`` plus the
    fourth-moment correction.

    ``check=False`` skips the positive-definiteness test on the Hessian limit,
    which the score covariance itself does not need.
    """
    H, corr, _ = _score_parts(space, theta0, fm, nodes, kernel, steps, check)
    S = 2 * H + corr
    return (S + S.T) / 2


def sigma_W(space, theta0, fm, nodes=DEFAULT_NODES, kernel="cumulant", steps=None):
    """Sandwich covariance ``H^{-1} S H^{-1}`` of the Whittle estimator."""
    theta0 = space.check(theta0)
    H, corr, se = _score_parts(space, theta0, fm, nodes, kernel, steps)
    S = 2 * H + corr
    S = (S + S.T) / 2
    Hi = np.linalg.inv(H)
    SW = Hi @ S @ Hi
    return AsymptoticCovariances(
        sigma_hessian=H, sigma_score=S, sigma_W=(SW + SW.T) / 2, quadrature_nodes=int(nodes),
        fd_step=fd_steps(theta0) if steps is None else np.asarray(steps, float),
        correction=corr, correction_se=se)


# ----------------------------------------------------------------------------
# adjusted Whittle


def _require_univariate(sm):
    if sm.m != 1 or sm.model.d != 1:
        raise UnsupportedDimensionError(
            f"adjusted Whittle needs m = d = 1, got m = {sm.m}, d = {sm.model.d}")


def _pi_sq(space, z):
    return lambda t: np.abs(pi_batch(space.sampled(t, innovations=True), z)[:, 0, 0]) ** 2


def adjusted_parts(space, theta0, fm, nodes=DEFAULT_NODES, kernel="cumulant", steps=None):
    """``(Sigma_hess^A, Sigma_score^A, correction, correction_se)`` for the adjusted estimator."""
    theta0 = space.check(theta0)
    sm = space.sampled(theta0, innovations=True)
    _require_univariate(sm)
    w = quadrature_grid(nodes)
    z = np.exp(1j * w)
    V = float(sm.V[0, 0])
    grad_sq = _fd(_pi_sq(space, z), space, theta0, steps)              # (M, r) of d|Pi|^2
    grad_log = -grad_sq / _pi_sq(space, z)(theta0)[:, None]             # d log |Pi|^{-2}
    G = _integrate(grad_log[:, :, None] * grad_log[:, None, :])
    H = _check_pd(V / (2 * np.pi) * G, "adjusted Hessian limit matrix")
    phi_p = phi_batch(sm, z)[:, 0, :]                                   # (M, N)
    phi_m = phi_p[_neg_index(len(w))]
    N = sm.N
    # row-vector Kronecker products, index a * N + b as in np.kron
    kp = (phi_p[:, :, None] * phi_m[:, None, :]).reshape(len(w), N * N)
    km = (phi_m[:, :, None] * phi_p[:, None, :]).reshape(len(w), N * N)
    a = _real_part(_integrate(grad_sq[:, :, None] * kp[:, None, :]), "adjusted correction")
    b = _real_part(_integrate(grad_sq[:, :, None] * km[:, None, :]), "adjusted correction")
    scale = 1 / (4 * np.pi ** 2)
    corr = _contract(a.T, fm.kernel(kernel), b.T, scale)
    se = None
    bk = fm.batch_kernels(kernel)
    if bk is not None and len(bk) > 1:
        reps = np.stack([_contract(a.T, Kb, b.T, scale) for Kb in bk])
        se = reps.std(axis=0, ddof=1) / np.sqrt(len(bk))
    S = V ** 2 / np.pi * G + corr
    return H, (S + S.T) / 2, corr, se


def sigma_W_adjusted(space, theta0, fm, nodes=DEFAULT_NODES, kernel="cumulant", steps=None):
    """Sandwich covariance of the adjusted Whittle estimator (univariate models only)."""
    H, S, _, _ = adjusted_parts(space, theta0, fm, nodes, kernel, steps)
    Hi = np.linalg.inv(H)
    out = Hi @ S @ Hi
    return (out + out.T) / 2


# ----------------------------------------------------------------------------
# integrated periodogram


def sigma_eta(sm, eta, fm, nodes=None, kernel="cumulant"):
    r"""Limit variance of :math:`\frac{1}{2\sqrt n}\sum_j \operatorname{tr}(\eta(\omega_j)(I_n(\omega_j) - f(\omega_j)))`.

    Parameters
    ----------
    eta : callable or array
        Either ``omegas -> (M, m, m)`` or values on :func:`quadrature_grid`.
        Must be Hermitian at every node.
    """
    if callable(eta):
        w = quadrature_grid(DEFAULT_NODES if nodes is None else nodes)
        E = np.asarray(eta(w), dtype=complex)
    else:
        E = np.asarray(eta, dtype=complex)
        w = quadrature_grid(E.shape[0])
    m = sm.m
    if E.shape != (len(w), m, m):
        raise InvalidInputError(f"eta must have shape {(len(w), m, m)}, got {E.shape}")
    herm = np.max(np.abs(E - E.conj().transpose(0, 2, 1))) if E.size else 0.0
    if herm > 1e-10 * max(1.0, np.max(np.abs(E))):
        raise InvalidInputError(f"eta is not Hermitian (asymmetry {herm:.3g})")
    f = spectral_density_grid(sm, w)
    Ef = E @ f
    first = _real_part(_integrate(np.trace(Ef @ Ef, axis1=1, axis2=2)), "Sigma_eta") / np.pi
    neg = _neg_index(len(w))
    phi_p = phi_batch(sm, np.exp(1j * w))
    phi_m = phi_p[neg]
    N = sm.N
    L = np.swapaxes(phi_m, 1, 2) @ np.swapaxes(E, 1, 2) @ phi_p   # Phi(e^{-iw})^T eta^T Phi(e^{iw})
    R = np.swapaxes(phi_p, 1, 2) @ E @ phi_m                      # Phi(e^{iw})^T eta Phi(e^{-iw})
    lv = _real_part(_integrate(L.transpose(0, 2, 1).reshape(len(w), N * N)), "Sigma_eta")
    rv = _real_part(_integrate(R.transpose(0, 2, 1).reshape(len(w), N * N)), "Sigma_eta")
    corr = lv @ fm.kernel(kernel) @ rv / (16 * np.pi ** 4)
    return float(first + corr)


# ----------------------------------------------------------------------------
# confidence intervals


def normal_quantile(p):
    return float(scipy.stats.norm.ppf(p))


def confidence_intervals(result, cov, n, level=0.95):
    """Per-parameter intervals ``theta_i +/- z_{(1+level)/2} sqrt(cov[i, i] / n)``.

    ``result`` is an :class:`EstimationResult` or a parameter vector.
    Returns an ``(r, 2)`` array of lower and upper limits.
    """
    if not 0 < level < 1:
        raise RangeError(f"level must lie in (0, 1), got {level}")
    theta = np.asarray(getattr(result, "theta_hat", result), dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (theta.size, theta.size):
        raise InvalidInputError(f"cov must be {theta.size} x {theta.size}, got {cov.shape}")
    if not n >= 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    d = np.diag(cov)
    if np.any(d < -1e-12 * max(1.0, np.abs(d).max())):
        raise InvalidInputError("cov has negative diagonal entries")
    half = normal_quantile((1 + level) / 2) * np.sqrt(np.clip(d, 0, None) / n)
    return np.column_stack([theta - half, theta + half])
