"""Spectral density of the sampled output, periodogram and sample autocovariances.

Frequencies follow the grid ``omega_j = pi j / n`` for ``j = -n+1, ..., n``
(2n points on ``(-pi, pi]``), which is half the usual ``2 pi / n`` spacing.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, RangeError

HERMITIAN_DRIFT_GUARD = 1e-8


def observations(path):
    """``(n, m)`` float array from a ``SamplePath`` or array-like."""
    Y = getattr(path, "observations", path)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise InvalidInputError(f"observations must be (n, m), got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("observations contain non-finite values")
    return Y


def spectral_density_grid(sm, omegas):
    r"""Spectral density ``f(omega)`` at every frequency in ``omegas``.

    .. math:: f(\omega) = \frac{1}{2\pi} G(\omega) \Sigma_N G(\omega)^H,
              \qquad G(\omega) = C (e^{i\omega} I - e^{A\Delta})^{-1}

    Returns an array of shape ``omegas.shape + (m, m)``.
    """
    w = np.asarray(omegas, dtype=float)
    flat = w.reshape(-1)
    N, m = sm.N, sm.m
    lhs = np.exp(1j * flat)[:, None, None] * np.eye(N)[None] - sm.eAD.T[None]
    rhs = np.broadcast_to(sm.C.T.astype(complex), (len(flat), N, m))
    Gt = np.linalg.solve(lhs, rhs)  # G^T, shape (M, N, m)
    G = Gt.transpose(0, 2, 1)
    f = G @ sm.sigma_N[None] @ Gt.conj() / (2 * np.pi)
    f = (f + f.conj().transpose(0, 2, 1)) / 2
    return f.reshape(w.shape + (m, m))


def spectral_density(sm, omega):
    """Spectral density matrix at a single frequency in ``[-pi, pi]``."""
    omega = float(omega)
    if not -np.pi - 1e-12 <= omega <= np.pi + 1e-12:
        raise RangeError(f"omega must lie in [-pi, pi], got {omega}")
    return spectral_density_grid(sm, omega)


def fourier_frequencies(n):
    j = np.arange(-n + 1, n + 1)
    return j, np.pi * j / n


@dataclass(frozen=True, eq=False)
class PeriodogramGrid:
    """Periodogram matrices on the 2n-point grid.

    ``values[k]`` is ``I_n(frequencies[k])`` with ``frequencies[k] = pi * j[k] / n``.
    """

    n: int
    j: np.ndarray
    frequencies: np.ndarray
    values: np.ndarray

    @property
    def m(self):
        return self.values.shape[-1]

    def to_csv(self, path):
        m = self.m
        pairs = [(a, b) for a in range(m) for b in range(m)]
        header = ["j", "omega"]
        for a, b in pairs:
            header += [f"Re(I[{a + 1},{b + 1}])", f"Im(I[{a + 1},{b + 1}])"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(len(self.j)):
                row = [int(self.j[k]), repr(float(self.frequencies[k]))]
                for a, b in pairs:
                    z = self.values[k, a, b]
                    row += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(row)


def periodogram(path):
    r"""Periodogram :math:`I_n(\omega_j) = d(\omega_j) d(\omega_j)^H / (2\pi n)` with
    :math:`d(\omega) = \sum_{k=1}^n Y_k e^{-ik\omega}`, via one FFT of length 2n."""
    Y = observations(path)
    n, m = Y.shape
    if n < 2:
        raise RangeError(f"periodogram needs n >= 2 observations, got {n}")
    x = np.zeros((2 * n, m))
    x[1:n + 1] = Y  # time index k = 1..n
    X = np.fft.fft(x, axis=0)
    j, w = fourier_frequencies(n)
    d = X[j % (2 * n)]
    I = d[:, :, None] * d[:, None, :].conj() / (2 * np.pi * n)
    herm = I.conj().transpose(0, 2, 1)
    drift = np.max(np.abs(I - herm)) if I.size else 0.0
    if drift > HERMITIAN_DRIFT_GUARD * max(1.0, np.max(np.abs(I))):
        raise InvalidInputError(f"periodogram lost Hermitian symmetry (drift {drift:.3g})")
    I = (I + herm) / 2
    return PeriodogramGrid(n=n, j=j, frequencies=w, values=I)


@dataclass(frozen=True, eq=False)
class AutocovarianceSet:
    """Sample autocovariances ``values[h] = Gamma_n(h)`` for ``h = 0..max_lag``.

    Negative lags follow ``Gamma_n(-h) = Gamma_n(h)^T``.
    """

    n: int
    values: np.ndarray

    def at(self, h):
        return self.values[h] if h >= 0 else self.values[-h].T


def sample_autocovariance(path, max_lag=None):
    """``Gamma_n(h) = (1/n) sum_{k=1}^{n-h} Y_{k+h} Y_k^T`` (divisor n for every lag)."""
    Y = observations(path)
    n, m = Y.shape
    if max_lag is None:
        max_lag = n - 1
    if not 0 <= max_lag < n:
        raise RangeError(f"max_lag must satisfy 0 <= max_lag < n = {n}, got {max_lag}")
    vals = np.empty((max_lag + 1, m, m))
    for h in range(max_lag + 1):
        vals[h] = Y[h:].T @ Y[:n - h] / n
    return AutocovarianceSet(n=n, values=vals)
