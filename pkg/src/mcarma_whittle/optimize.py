"""Bounded derivative-free minimization with multiple starts."""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .exceptions import InfeasibleStartError, InvalidInputError

WHITTLE = "Whittle"
ADJUSTED = "AdjustedWhittle"
QMLE = "QMLE"


@dataclass(frozen=True, eq=False)
class EstimationResult:
    theta_hat: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    estimator_kind: str
    restarts_used: int
    n_evaluations: int = 0
    infeasible_evaluations: int = 0

    def as_dict(self):
        return {
            "theta_hat": self.theta_hat.tolist(),
            "objective_value": self.objective_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "estimator_kind": self.estimator_kind,
            "restarts_used": self.restarts_used,
        }


class _Counted:
    def __init__(self, fun):
        self.fun = fun
        self.calls = 0
        self.infeasible = 0

    def __call__(self, x):
        self.calls += 1
        v = self.fun(x)
        if not np.isfinite(v):
            self.infeasible += 1
            return np.inf
        return v


def _initial_simplex(x0, lower, upper, scale=0.05):
    """Axis simplex around ``x0`` with steps of ``scale * max(|x_i|, 0.05)``,
    flipped inward where a step would leave the box."""
    r = x0.size
    sim = np.tile(x0, (r + 1, 1))
    for i in range(r):
        h = scale * max(abs(x0[i]), 0.05)
        if x0[i] + h > upper[i]:
            h = -h
        sim[i + 1, i] = x0[i] + h
    return np.clip(sim, lower, upper)


def minimize(objective, space, starts, tol=1e-8, kind=WHITTLE, max_iter=None):
    """Minimize ``objective(theta)`` over the box of ``space`` from each start.

    Each start runs a bounded Nelder-Mead search (``scipy.optimize.minimize``).
    The best finite minimum wins; ties go to the lexicographically smallest
    parameter vector, so the outcome does not depend on the order of starts.

    Parameters
    ----------
    objective : callable
        ``theta -> float``; may return ``inf`` at infeasible points.
    space : ParamSpace
    starts : sequence of r-vectors
        Starting points inside the box.
    tol : float
        Simplex diameter and value spread at convergence.
    """
    starts = [np.asarray(s, dtype=float).reshape(-1) for s in np.atleast_2d(starts)]
    if not starts:
        raise InvalidInputError("need at least one start")
    lo, hi = space.lower, space.upper
    r = space.r
    for s in starts:
        if s.size != r:
            raise InvalidInputError(f"start has {s.size} entries, expected {r}")
        if not space.contains(s):
            raise InvalidInputError(f"start {s.tolist()} lies outside the parameter box")
    max_iter = max_iter or 400 * r
    fun = _Counted(objective)
    best = None
    iters = 0
    used = 0
    for s in starts:
        if not np.isfinite(fun(s)):
            continue
        used += 1
        res = scipy.optimize.minimize(
            fun, s, method="Nelder-Mead", bounds=list(zip(lo, hi)),
            options={"xatol": tol, "fatol": tol, "maxiter": max_iter, "maxfev": 2 * max_iter,
                     "initial_simplex": _initial_simplex(s, lo, hi), "adaptive": r > 5})
        iters += int(res.nit)
        if not np.isfinite(res.fun):
            continue
        cand = (float(res.fun), tuple(np.asarray(res.x).tolist()), bool(res.success))
        if best is None or cand[:2] < best[:2]:
            best = cand
    if best is None:
        raise InfeasibleStartError("objective is infinite at every start")
    return EstimationResult(
        theta_hat=np.clip(np.array(best[1]), lo, hi),
        objective_value=best[0],
        iterations=iters,
        converged=best[2],
        estimator_kind=kind,
        restarts_used=used,
        n_evaluations=fun.calls,
        infeasible_evaluations=fun.infeasible,
    )


def perturbed_starts(start, space, count=5, spread=0.1, seed=0):
    """``start`` plus ``count - 1`` points drawn uniformly within
    ``spread * max(|start_i|, 1)`` of it, clipped into the box."""
    from .levy import make_rng
    start = space.clip(np.asarray(start, dtype=float).reshape(-1))
    rng = make_rng(seed, 0, 7)
    out = [start]
    width = spread * np.maximum(np.abs(start), 1.0)
    for _ in range(count - 1):
        out.append(space.clip(start + rng.uniform(-1, 1, start.size) * width))
    return out
