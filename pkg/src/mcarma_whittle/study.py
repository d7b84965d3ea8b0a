"""Monte-Carlo study harness and single-dataset estimation.

Config files are flat ``key = value`` text with ``#`` comments; arrays are
written in brackets, e.g. ``theta0 = [-2, -2, -1]``.  Matrices are given
row-major as flat arrays.
"""

import ast
import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .estimator import estimator_kind, objective_for, validate_observations
from .exceptions import InvalidInputError, MCARMAError, ParseError, StudyFailureError
from .levy import (
    LevySpec,
    SamplePath,
    SimulationConfig,
    euler_maruyama,
    exact_gaussian_sample,
    make_rng,
)
from .objectives import ParamSpace
from .optimize import WHITTLE, minimize
from .zoo import default_driver, get_family

log = logging.getLogger(__name__)

REPORT_HEADER = ["estimator", "n", "param_index", "theta0", "mean", "bias", "std", "failures"]
MAX_FAILURE_RATE = 0.2


def parse_config(text, source="<config>"):
    """Parse flat ``key = value`` text into a dict of Python values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}",
                             row=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{source}:{lineno}: empty key", row=lineno)
        out[key] = _parse_value(value, source, lineno)
    return out


def _parse_value(value, source, lineno):
    if value.startswith("["):
        if not value.endswith("]"):
            raise ParseError(f"{source}:{lineno}: unterminated array", row=lineno)
        items = [s.strip() for s in value[1:-1].split(",") if s.strip()]
        return [_scalar(s) for s in items]
    return _scalar(value)


def _scalar(s):
    try:
        return ast.literal_eval(s)
    except (ValueError, SyntaxError):
        return s.strip("'\"")


def read_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def _matrix(flat, name):
    a = np.asarray(flat, dtype=float)
    k = int(round(np.sqrt(a.size)))
    if k * k != a.size:
        raise InvalidInputError(f"{name} must hold a square matrix row-major, got {a.size} entries")
    return a.reshape(k, k)


def driver_from_config(cfg, family, theta0):
    kind = str(cfg.get("driver", "brownian")).lower()
    if kind == "nig" and "nig_alpha" in cfg:
        return LevySpec.nig(cfg["nig_alpha"], cfg["nig_beta"], cfg.get("nig_delta", 1.0),
                            _matrix(cfg["nig_Delta"], "nig_Delta"))
    sigma_L = _matrix(cfg["sigma_L"], "sigma_L") if "sigma_L" in cfg else \
        family.build(theta0).sigma_L
    return default_driver(family, kind, sigma_L)


@dataclass(frozen=True, eq=False)
class StudyConfig:
    family: str
    theta0: Optional[np.ndarray] = None
    driver: Optional[LevySpec] = None
    delta: float = 1.0
    sample_sizes: Tuple[int, ...] = (500, 2000, 5000)
    replicates: int = 500
    estimators: Tuple[str, ...] = (WHITTLE,)
    seed: int = 0
    output_path: Optional[str] = None
    euler_step: float = 0.01
    burn_in: Optional[float] = None
    sampler: str = "euler"
    start_spread: float = 0.25
    tol: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        fam = get_family(self.family)
        object.__setattr__(self, "family", fam.name)
        th = fam.default_theta0 if self.theta0 is None else self.theta0
        th = np.asarray(th, dtype=float).reshape(-1)
        if th.size != fam.r:
            raise InvalidInputError(f"theta0 needs {fam.r} entries, got {th.size}")
        object.__setattr__(self, "theta0", th)
        if self.driver is None:
            object.__setattr__(self, "driver", default_driver(fam, "brownian", fam.build(th).sigma_L))
        if int(self.replicates) < 1:
            raise InvalidInputError("replicates must be >= 1")
        sizes = tuple(int(n) for n in np.atleast_1d(self.sample_sizes))
        if not sizes or min(sizes) < 16:
            raise InvalidInputError("each sample size must be >= 16")
        object.__setattr__(self, "sample_sizes", sizes)
        kinds = tuple(estimator_kind(e) for e in np.atleast_1d(self.estimators))
        if not kinds:
            raise InvalidInputError("need at least one estimator")
        object.__setattr__(self, "estimators", kinds)
        if self.sampler not in ("euler", "exact"):
            raise InvalidInputError(f"sampler must be 'euler' or 'exact', got {self.sampler!r}")
        if int(self.threads) < 1:
            raise InvalidInputError("threads must be >= 1")

    @classmethod
    def from_mapping(cls, cfg, **overrides):
        cfg = {**cfg, **{k: v for k, v in overrides.items() if v is not None}}
        if "family" not in cfg:
            raise InvalidInputError("config needs a 'family' entry")
        fam = get_family(cfg["family"])
        theta0 = np.asarray(cfg.get("theta0", fam.default_theta0), dtype=float)
        kwargs = {k: cfg[k] for k in ("delta", "replicates", "seed", "euler_step", "burn_in",
                                      "sampler", "start_spread", "tol", "threads")
                  if k in cfg}
        if "sample_sizes" in cfg:
            kwargs["sample_sizes"] = tuple(np.atleast_1d(cfg["sample_sizes"]))
        if "estimators" in cfg:
            kwargs["estimators"] = tuple(np.atleast_1d(cfg["estimators"]))
        return cls(family=fam.name, theta0=theta0, driver=driver_from_config(cfg, fam, theta0),
                   output_path=cfg.get("output"), **kwargs)


@dataclass(frozen=True, eq=False)
class StudyRow:
    estimator: str
    n: int
    param_index: int
    theta0: float
    mean: float
    bias: float
    std: float
    failures: int


@dataclass(frozen=True, eq=False)
class StudyReport:
    rows: list
    estimates: dict = field(default_factory=dict)  # (estimator, n) -> (replicates, r) array

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow([r.estimator, r.n, r.param_index, _fmt(r.theta0), _fmt(r.mean),
                        _fmt(r.bias), _fmt(r.std), r.failures])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def table(self, estimator, n):
        return [r for r in self.rows if r.estimator == estimator and r.n == n]


def _fmt(x):
    return format(float(x), ".10g")


def simulate_path(family, theta0, driver, delta, n, seed, replicate=0, sampler="euler",
                  euler_step=0.01, burn_in=None):
    """One sample path of length ``n`` from the family at ``theta0``."""
    fam = get_family(family) if isinstance(family, str) else family
    model = fam.build(theta0)
    if sampler == "exact":
        model.validate(delta)
        return exact_gaussian_sample(model, driver, delta, n, seed=seed, replicate=replicate)
    cfg = SimulationConfig(delta=delta, horizon=n * delta, seed=seed, euler_step=euler_step,
                           burn_in=burn_in)
    return euler_maruyama(model, driver, cfg, replicate=replicate)


def _start(cfg, space, rid, max_draws=100):
    """theta0 + U(-spread, spread) projected into the box, redrawn while the model
    it gives is invalid (e.g. Sigma_L not positive definite)."""
    rng = make_rng(cfg.seed, rid, 2)
    for _ in range(max_draws):
        start = space.clip(cfg.theta0 + rng.uniform(-cfg.start_spread, cfg.start_spread, space.r))
        if space.try_sampled(start) is not None:
            return start
    return space.clip(cfg.theta0)


def _replicate(args):
    cfg, size_index, rep = args
    n = cfg.sample_sizes[size_index]
    rid = size_index * 1_000_000 + rep
    fam = get_family(cfg.family)
    space = ParamSpace.from_family(fam, cfg.delta)
    out = {}
    try:
        path = simulate_path(fam, cfg.theta0, cfg.driver, cfg.delta, n, cfg.seed, rid,
                             cfg.sampler, cfg.euler_step, cfg.burn_in)
    except MCARMAError as exc:
        log.warning("replicate %d (n=%d): simulation failed: %s", rep, n, exc)
        return size_index, rep, {k: None for k in cfg.estimators}
    start = _start(cfg, space, rid)
    for kind in cfg.estimators:
        try:
            res = minimize(objective_for(kind, path.observations, space), space, [start],
                           tol=cfg.tol, kind=kind)
            out[kind] = res.theta_hat
        except (MCARMAError, np.linalg.LinAlgError) as exc:
            log.warning("replicate %d (n=%d, %s) failed: %s", rep, n, kind, exc)
            out[kind] = None
    return size_index, rep, out


def _moments(X):
    """Mean and sample standard deviation by Welford's recursion over rows, in order."""
    mean = np.zeros(X.shape[1])
    m2 = np.zeros(X.shape[1])
    for k, x in enumerate(X, start=1):
        d = x - mean
        mean = mean + d / k
        m2 = m2 + d * (x - mean)
    std = np.sqrt(m2 / (len(X) - 1)) if len(X) > 1 else np.zeros_like(mean)
    return mean, std


def run_study(cfg):
    """Simulate, estimate and aggregate; deterministic for a fixed seed.

    Each (sample size, replicate) pair owns its random streams, and results are
    reduced in replicate order, so the report does not depend on ``threads``.
    """
    tasks = [(cfg, i, k) for i in range(len(cfg.sample_sizes)) for k in range(cfg.replicates)]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=int(cfg.threads)) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, len(tasks) // (4 * cfg.threads))))
    else:
        results = [_replicate(t) for t in tasks]
    results.sort(key=lambda t: (t[0], t[1]))
    rows, estimates = [], {}
    for i, n in enumerate(cfg.sample_sizes):
        block = [res for si, _, res in results if si == i]
        for kind in cfg.estimators:
            ok = [res[kind] for res in block if res[kind] is not None]
            failures = len(block) - len(ok)
            if failures > MAX_FAILURE_RATE * len(block):
                raise StudyFailureError(
                    f"{kind} at n={n}: {failures} of {len(block)} replicates failed")
            X = np.array(ok)
            estimates[(kind, n)] = X
            mean, std = _moments(X)
            for j in range(X.shape[1]):
                rows.append(StudyRow(kind, n, j + 1, cfg.theta0[j], mean[j],
                                     abs(mean[j] - cfg.theta0[j]), std[j], failures))
    report = StudyReport(rows, estimates)
    if cfg.output_path:
        report.to_csv(cfg.output_path)
    return report


@dataclass(frozen=True, eq=False)
class EstimateOutcome:
    result: object
    intervals: Optional[np.ndarray]
    covariance: Optional[np.ndarray]
    n: int

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param_index", "theta_hat", "lower", "upper"])
        for j, t in enumerate(self.result.theta_hat):
            lo, hi = ("", "") if self.intervals is None else map(_fmt, self.intervals[j])
            w.writerow([j + 1, _fmt(t), lo, hi])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def estimate_once(data, family, estimator="whittle", start=None, delta=1.0, level=0.95,
                  driver=None, n_starts=5, seed=0, intervals=True):
    """Estimate on one dataset (CSV path, :class:`SamplePath` or array) and attach
    analytic confidence intervals evaluated at the estimate."""
    from .estimator import WhittleEstimator
    if isinstance(data, (str, bytes)) or hasattr(data, "__fspath__"):
        data = SamplePath.from_csv(data, delta)
    Y = validate_observations(data)
    est = WhittleEstimator(family=family, method=estimator, delta=delta, theta_init=start,
                           n_starts=n_starts, random_state=seed).fit(Y)
    ci = cov = None
    if intervals:
        cov = est.asymptotic_covariance(driver)
        ci = est.confidence_intervals(level, cov=cov)
    return EstimateOutcome(est.result_, ci, cov, Y.shape[0])


def simulate_from_config(cfg, seed=None):
    """Sample path described by a config mapping (keys: family, theta0, driver,
    delta, n or horizon, seed, euler_step, burn_in, sampler, replicate)."""
    fam = get_family(cfg["family"])
    theta0 = np.asarray(cfg.get("theta0", fam.default_theta0), dtype=float)
    delta = float(cfg.get("delta", 1.0))
    if "n" in cfg:
        n = int(cfg["n"])
    elif "horizon" in cfg:
        n = int(round(float(cfg["horizon"]) / delta))
    else:
        raise InvalidInputError("config needs 'n' or 'horizon'")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    return simulate_path(fam, theta0, driver_from_config(cfg, fam, theta0), delta, n, seed,
                         int(cfg.get("replicate", 0)), cfg.get("sampler", "euler"),
                         float(cfg.get("euler_step", 0.01)), cfg.get("burn_in"))
