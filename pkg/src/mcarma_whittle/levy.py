"""Driving Levy processes and path simulation.

Two drivers are supported: Brownian motion with covariance ``sigma_L`` and the
multivariate normal-inverse Gaussian (NIG) process, centered through its drift.
Paths are produced either by an Euler-Maruyama scheme on a fine grid or, for
Brownian drivers, by exact sampling of the discrete-time transition.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .exceptions import (
    InvalidInputError,
    InvalidParameterError,
    ParseError,
    SimulationBlowupError,
    UnsupportedDriverError,
)
from .linalg import as_matrix, is_symmetric_pd, matrix_exp, noise_covariance, stationary_covariance

BROWNIAN = "brownian"
NIG = "nig"


def make_rng(seed, replicate=0, stream=0):
    """Counter-based generator keyed by ``(seed, replicate, stream)``.

    Every key gives an independent Philox stream, so replicates can be simulated
    in any order or in parallel without changing their draws.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(replicate), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class LevySpec:
    """Description of the driving Levy process.

    Use :meth:`brownian` or :meth:`nig` rather than the raw constructor.  For NIG
    drivers the centering drift ``mu = -delta_nig * Delta_nig @ beta / kappa`` is
    always derived, never supplied.
    """

    kind: str
    sigma_L: Optional[np.ndarray] = None
    nig_alpha: Optional[float] = None
    nig_beta: Optional[np.ndarray] = None
    nig_delta: Optional[float] = None
    nig_Delta: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = field(default=None, init=False)

    def __post_init__(self):
        if self.kind == BROWNIAN:
            S = as_matrix(self.sigma_L, "sigma_L")
            if not is_symmetric_pd(S):
                raise InvalidParameterError("Brownian sigma_L must be symmetric positive definite",
                                            assumption="A2")
            object.__setattr__(self, "sigma_L", S)
        elif self.kind == NIG:
            beta = np.atleast_1d(np.asarray(self.nig_beta, dtype=float))
            Delta = as_matrix(self.nig_Delta, "nig_Delta")
            alpha, delta = float(self.nig_alpha), float(self.nig_delta)
            if Delta.shape != (len(beta), len(beta)) or not is_symmetric_pd(Delta):
                raise InvalidParameterError("nig_Delta must be a symmetric PD d x d matrix")
            if alpha <= 0 or delta < 0:
                raise InvalidParameterError("NIG requires alpha > 0 and delta >= 0")
            kappa2 = alpha**2 - beta @ Delta @ beta
            if kappa2 <= 0:
                raise InvalidParameterError(
                    f"NIG requires kappa^2 = alpha^2 - beta' Delta beta > 0, got {kappa2:.6g}")
            kappa = np.sqrt(kappa2)
            object.__setattr__(self, "nig_beta", beta)
            object.__setattr__(self, "nig_Delta", Delta)
            object.__setattr__(self, "nig_alpha", alpha)
            object.__setattr__(self, "nig_delta", delta)
            object.__setattr__(self, "mu", -delta * Delta @ beta / kappa)
        else:
            raise InvalidInputError(f"unknown driver kind {self.kind!r}")

    @classmethod
    def brownian(cls, sigma_L):
        return cls(BROWNIAN, sigma_L=sigma_L)

    @classmethod
    def nig(cls, alpha, beta, delta, Delta):
        return cls(NIG, nig_alpha=alpha, nig_beta=beta, nig_delta=delta, nig_Delta=Delta)

    @classmethod
    def nig_with_covariance(cls, sigma_L, alpha=1.0):
        """Symmetric NIG driver (``beta = 0``) whose unit-time covariance is ``sigma_L``.

        With ``beta = 0`` and ``delta = alpha`` the covariance equals ``Delta``;
        the excess kurtosis of each coordinate is ``3 / alpha**2``.
        """
        S = as_matrix(sigma_L, "sigma_L")
        return cls.nig(alpha, np.zeros(S.shape[0]), alpha, S)

    @property
    def d(self):
        return self.sigma_L.shape[0] if self.kind == BROWNIAN else len(self.nig_beta)

    @property
    def kappa(self):
        b, D = self.nig_beta, self.nig_Delta
        return float(np.sqrt(self.nig_alpha**2 - b @ D @ b))

    @property
    def is_gaussian(self):
        return self.kind == BROWNIAN

    def covariance(self, dt=1.0):
        """Covariance of an increment over a step of length ``dt``."""
        if self.kind == BROWNIAN:
            return dt * self.sigma_L
        k = self.kappa
        Db = self.nig_Delta @ self.nig_beta
        return dt * self.nig_delta * (self.nig_Delta / k + np.outer(Db, Db) / k**3)

    def mean(self, dt=1.0):
        """Mean of an increment; zero for both drivers by construction."""
        if self.kind == BROWNIAN:
            return np.zeros(self.d)
        return dt * (self.mu + self.nig_delta / self.kappa * self.nig_Delta @ self.nig_beta)

    def describe(self):
        if self.kind == BROWNIAN:
            return {"driver": BROWNIAN, "sigma_L": self.sigma_L.tolist()}
        return {"driver": NIG, "alpha": self.nig_alpha, "beta": self.nig_beta.tolist(),
                "delta": self.nig_delta, "Delta": self.nig_Delta.tolist()}


def sample_increments(spec, dt, count, seed=0):
    """Draw ``count`` i.i.d. increments of the driver over steps of length ``dt``.

    NIG increments use the normal variance-mean mixture
    ``mu dt + z Delta beta + sqrt(z) chol(Delta) eps`` where ``z`` is inverse
    Gaussian with mean ``delta dt / kappa`` and shape ``(delta dt)**2``.

    Returns
    -------
    (count, d) ndarray
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be > 0, got {dt}")
    count = int(count)
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    rng = make_rng(seed)
    d = spec.d
    if spec.kind == BROWNIAN:
        chol = np.linalg.cholesky(spec.sigma_L)
        return rng.standard_normal((count, d)) @ chol.T * np.sqrt(dt)
    scale = spec.nig_delta * dt
    if scale == 0:
        return np.zeros((count, d))
    z = rng.wald(scale / spec.kappa, scale**2, size=count)
    eps = rng.standard_normal((count, d))
    chol = np.linalg.cholesky(spec.nig_Delta)
    Db = spec.nig_Delta @ spec.nig_beta
    return dt * spec.mu + z[:, None] * Db + np.sqrt(z)[:, None] * (eps @ chol.T)


@dataclass(frozen=True)
class SimulationConfig:
    """Sampling distance, Euler step, horizon ``T`` (``n = T / delta``), seed and burn-in.

    ``burn_in=None`` means the default of ``100 * delta``.
    """

    delta: float = 1.0
    horizon: float = 500.0
    seed: int = 0
    euler_step: float = 0.01
    burn_in: Optional[float] = None

    def __post_init__(self):
        if not (self.delta > 0 and self.euler_step > 0 and self.horizon > 0):
            raise InvalidInputError("delta, euler_step and horizon must be > 0")
        if self.burn_in is not None and self.burn_in < 0:
            raise InvalidInputError("burn_in must be >= 0")
        k = round(self.delta / self.euler_step)
        if k < 1 or abs(k * self.euler_step - self.delta) > 1e-12:
            raise InvalidInputError(
                f"euler_step {self.euler_step} does not divide delta {self.delta}")

    @property
    def steps_per_obs(self):
        return int(round(self.delta / self.euler_step))

    @property
    def n(self):
        return int(round(self.horizon / self.delta))

    @property
    def burn_in_time(self):
        return 100 * self.delta if self.burn_in is None else self.burn_in

    @property
    def burn_steps(self):
        return int(round(self.burn_in_time / self.euler_step))


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Observations ``Y_delta, ..., Y_{n delta}`` stored as an ``(n, m)`` array."""

    observations: np.ndarray
    delta: float = 1.0

    def __post_init__(self):
        Y = np.asarray(self.observations, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2:
            raise InvalidInputError(f"observations must be (n, m), got {Y.shape}")
        if not np.all(np.isfinite(Y)):
            raise InvalidInputError("observations contain non-finite values")
        object.__setattr__(self, "observations", Y)

    @property
    def n(self):
        return self.observations.shape[0]

    @property
    def m(self):
        return self.observations.shape[1]

    def __len__(self):
        return self.n

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"y{i + 1}" for i in range(self.m)])
            for k, row in enumerate(self.observations, start=1):
                w.writerow([k] + [format(v, ".17g") for v in row])

    @classmethod
    def from_csv(cls, path, delta=1.0):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ParseError(f"{path}: empty file", row=0)
        header = [h.strip() for h in rows[0]]
        if len(header) < 2 or header[0] != "k":
            raise ParseError(f"{path}: header must be 'k,y1,...,ym', got {rows[0]}", row=1)
        width = len(header)
        data = []
        for i, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"{path}: row {i} has {len(row)} columns, expected {width}", row=i)
            try:
                data.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(f"{path}: row {i}: {exc}", row=i) from None
        if not data:
            raise ParseError(f"{path}: no observations", row=2)
        return cls(np.array(data), delta)


@numba.njit(cache=True)
def _euler_kernel(A, B, C, dL, h, spo, burn_steps, n):
    N = A.shape[0]
    d = B.shape[1]
    m = C.shape[0]
    x = np.zeros(N)
    new = np.zeros(N)
    out = np.zeros((n, m))
    total = burn_steps + n * spo
    k = 0
    for s in range(total):
        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc += A[i, j] * x[j]
            bl = 0.0
            for j in range(d):
                bl += B[i, j] * dL[s, j]
            new[i] = x[i] + h * acc + bl
        for i in range(N):
            x[i] = new[i]
            if not np.isfinite(x[i]):
                return out, s + 1
        t = s + 1 - burn_steps
        if t > 0 and t % spo == 0:
            for i in range(m):
                acc = 0.0
                for j in range(N):
                    acc += C[i, j] * x[j]
                out[k, i] = acc
            k += 1
    return out, -1


def euler_maruyama(model, spec, cfg, increments=None, replicate=0):
    """Simulate ``dX = A X dt + B dL`` from ``X(0) = 0`` with step ``cfg.euler_step``.

    The first ``cfg.burn_in_time`` time units are discarded; the returned path
    holds ``Y_{k delta} = C X_{k delta}`` for ``k = 1..n`` after burn-in.
    ``increments`` overrides the Levy draws (shape ``(burn_steps + n * steps_per_obs, d)``).
    """
    model.validate(cfg.delta)
    if spec.d != model.d:
        raise InvalidInputError(f"driver dimension {spec.d} != model input dimension {model.d}")
    total = cfg.burn_steps + cfg.n * cfg.steps_per_obs
    if increments is None:
        dL = sample_increments(spec, cfg.euler_step, total, make_rng(cfg.seed, replicate, 0))
    else:
        dL = np.asarray(increments, dtype=float).reshape(total, model.d)
    out, blown = _euler_kernel(model.A, model.B, model.C, np.ascontiguousarray(dL),
                               float(cfg.euler_step), cfg.steps_per_obs, cfg.burn_steps, cfg.n)
    if blown >= 0:
        t = blown * cfg.euler_step
        raise SimulationBlowupError(f"state became non-finite at time {t:.4g}", time=t)
    return SamplePath(out, cfg.delta)


def _psd_factor(S):
    w, U = np.linalg.eigh((S + S.T) / 2)
    return U * np.sqrt(np.clip(w, 0.0, None))


def exact_gaussian_sample(model, driver, delta, n, seed=0, replicate=0):
    """Exact-in-law sample of a Brownian-driven model at spacing ``delta``.

    ``X_k = e^{A delta} X_{k-1} + N_k`` with ``N_k ~ Normal(0, Sigma_N)`` and
    ``X_0`` drawn from the stationary law.  ``driver`` is a Brownian
    :class:`LevySpec` or a covariance matrix.
    """
    if isinstance(driver, LevySpec):
        if not driver.is_gaussian:
            raise UnsupportedDriverError("exact sampling supports Brownian drivers only")
        sigma_L = driver.sigma_L
    else:
        sigma_L = as_matrix(driver, "sigma_L")
    n = int(n)
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    eAD = matrix_exp(model.A, delta)
    sigma_N = noise_covariance(model.A, model.B, sigma_L, delta)
    P = stationary_covariance(eAD, sigma_N)
    rng = make_rng(seed, replicate, 1)
    x = _psd_factor(P) @ rng.standard_normal(model.N)
    noise = rng.standard_normal((n, model.N)) @ _psd_factor(sigma_N).T
    X = np.empty((n, model.N))
    for k in range(n):
        x = eAD @ x + noise[k]
        X[k] = x
    return SamplePath(X @ model.C.T, delta)
