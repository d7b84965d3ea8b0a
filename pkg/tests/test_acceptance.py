"""Acceptance criteria, each run at its stated tolerance.

Every test carries ``@pytest.mark.criterion(k)``; the terminal summary prints one
PASS/FAIL line per criterion with the measured numbers.  Run on its own with

    pytest tests/test_acceptance.py -v
"""

import time

import numpy as np
import pytest

from mcarma_whittle import asymptotics as asy
from mcarma_whittle.cli import main
from mcarma_whittle.levy import LevySpec
from mcarma_whittle.linalg import riccati_residual
from mcarma_whittle.objectives import ParamSpace, adjusted_whittle_objective
from mcarma_whittle.optimize import ADJUSTED, WHITTLE
from mcarma_whittle.sampled import ContinuousModel, build_sampled, pi_batch
from mcarma_whittle.spectral import periodogram, sample_autocovariance, spectral_density_grid
from mcarma_whittle.study import StudyConfig, run_study
from mcarma_whittle.zoo import FAMILIES, THETA0_MCAR1, THETA0_MCARMA21, build_carma21

E2M1 = np.e**2 - 1


def note(request, text):
    request.node.user_properties.append(("detail", text))
    print(text)


def fmt(a):
    return "[" + ", ".join(f"{x:.4f}" for x in np.atleast_1d(a)) + "]"


# ---------------------------------------------------------------------------
# 1. Brownian CARMA(2,1) at (-2, -2, -1), n = 2000, 100 replicates

@pytest.mark.criterion(1)
def test_criterion_1_carma21_whittle_n2000(request):
    theta0 = np.array([-2.0, -2.0, -1.0])
    table_mean = np.array([-2.0204, -1.9975, -0.9933])
    table_std = np.array([0.0755, 0.0637, 0.0547])
    band = 3 * table_std / np.sqrt(100) + np.abs(table_mean - theta0)
    t0 = time.perf_counter()
    rep = run_study(StudyConfig(family="carma21", theta0=theta0, sample_sizes=(2000,),
                                replicates=100, estimators=("whittle",), seed=2024))
    elapsed = time.perf_counter() - t0
    rows = rep.table(WHITTLE, 2000)
    mean = np.array([r.mean for r in rows])
    std = np.array([r.std for r in rows])
    ok = np.abs(mean - theta0) <= band
    note(request, f"means {fmt(mean)} vs theta0 +/- {fmt(band)}; inside {ok.tolist()}; "
                  f"empirical std {fmt(std)}; failures {rows[0].failures}; {elapsed:.0f}s")
    assert elapsed <= 15 * 60
    assert ok.all()


# ---------------------------------------------------------------------------
# 2. Brownian MCARMA(2,1) at the first parameter point, n = 500, 50 replicates

@pytest.mark.criterion(2)
def test_criterion_2_mcarma21_whittle_n500(request):
    theta0 = np.array(THETA0_MCARMA21, float)
    table_mean = np.array([-0.9969, -2.0218, 0.9980])
    table_std = np.array([0.0325, 0.0582, 0.0520])
    band = 3 * table_std / np.sqrt(50) + 0.02
    rep = run_study(StudyConfig(family="mcarma21_biv", theta0=theta0, sample_sizes=(500,),
                                replicates=50, estimators=("whittle",), seed=2025))
    rows = rep.table(WHITTLE, 500)[:3]
    mean = np.array([r.mean for r in rows])
    ok = np.abs(mean - table_mean) <= band
    note(request, f"means {fmt(mean)} vs {fmt(table_mean)} +/- {fmt(band)}; inside {ok.tolist()}; "
                  f"empirical std {fmt([r.std for r in rows])}; failures {rows[0].failures}")
    assert ok.all()


# ---------------------------------------------------------------------------
# 3. Gaussian CAR(1), theta0 = -1: adjusted Whittle variance e^2 - 1

@pytest.mark.criterion(3)
def test_criterion_3_car1_adjusted_variance(request):
    space = ParamSpace.from_family("car1")
    fm = asy.fourth_moment(space.sampled([-1.0]), LevySpec.brownian(np.eye(1)), asy.GAUSSIAN_ANALYTIC)
    analytic = asy.sigma_W_adjusted(space, [-1.0], fm)[0, 0]
    n = 5000
    rep = run_study(StudyConfig(family="car1", theta0=[-1.0], sample_sizes=(n,), replicates=200,
                                estimators=("adjusted",), seed=7, sampler="exact"))
    X = rep.estimates[(ADJUSTED, n)][:, 0]
    emp = n * X.var(ddof=1)
    rel = abs(analytic / E2M1 - 1)
    note(request, f"analytic {analytic:.9f} (rel err {rel:.1e}); empirical n*var {emp:.4f} = "
                  f"{emp / E2M1:.3f} x (e^2-1), band [0.7, 1.3]; replicates {len(X)}")
    assert rel <= 1e-6
    assert 0.7 * E2M1 <= emp <= 1.3 * E2M1


# ---------------------------------------------------------------------------
# 4. Score covariance identity

@pytest.mark.criterion(4)
@pytest.mark.parametrize("name", ["carma21", "mcarma21_biv"])
def test_criterion_4_gaussian_identity(request, name):
    fam = FAMILIES[name]
    space = ParamSpace.from_family(fam)
    th = np.array(fam.default_theta0, float)
    sm = space.sampled(th)
    fm = asy.fourth_moment(sm, LevySpec.brownian(sm.model.sigma_L), asy.GAUSSIAN_ANALYTIC)
    # the Hessian limit is singular at the MCARMA(2,1) point; the identity does not need it
    H, _, _ = asy._score_parts(space, th, fm, asy.DEFAULT_NODES, "cumulant", None, check=False)
    S = asy.sigma_score(space, th, fm, check=False)
    rel = np.abs(S - 2 * H).max() / np.abs(2 * H).max()
    note(request, f"{name}: max|S - 2H| / max|2H| = {rel:.2e}")
    assert rel <= 1e-8


@pytest.mark.criterion(4)
def test_criterion_4_nig_mcar1_identity(request):
    space = ParamSpace.from_family("mcar1_biv")
    th = np.array(THETA0_MCAR1, float)
    sm = space.sampled(th)
    drv = LevySpec.nig_with_covariance(sm.model.sigma_L)
    fm = asy.fourth_moment(sm, drv, asy.MONTE_CARLO, mc_samples=200_000, fine_steps=200, seed=3)
    H, corr, se = asy._score_parts(space, th, fm, asy.DEFAULT_NODES, "cumulant", None)
    z = np.abs(corr) / np.maximum(se, 1e-300)
    i = tuple(int(k) for k in np.unravel_index(z.argmax(), z.shape))
    note(request, f"NIG MCAR(1): max |S - 2H| / MC se = {z.max():.1f} at {i} "
                  f"(correction {corr[i]:.4g}, 2H {2 * H[i]:.4g}, se {se[i]:.2g}); tolerance 3")
    assert np.all(np.abs(corr) <= 3 * se)


# ---------------------------------------------------------------------------
# 5. Structural identities

@pytest.mark.criterion(5)
def test_criterion_5_structural(request):
    t0 = time.perf_counter()
    worst = {}
    rng = np.random.default_rng(55)

    res = []
    for name in ("mcarma21_biv", "mcar1_biv", "carma21", "car3"):
        fam = FAMILIES[name]
        sm = build_sampled(fam.build(fam.default_theta0), 1.0)
        res.append(riccati_residual(sm.eAD, sm.sigma_N, sm.C, sm.omega))
    worst["riccati residual"] = (max(res), 1e-10)

    acvf, grid = [], []
    for _ in range(200):
        n, m = int(rng.integers(2, 65)), int(rng.integers(1, 4))
        Y = rng.standard_normal((n, m))
        g, gam = periodogram(Y), sample_autocovariance(Y)
        grid.append(np.abs(g.values.sum(0) * np.pi / n - gam.at(0)).max())
        for h in range(-(n - 1), n):
            lhs = (g.values * np.exp(1j * h * g.frequencies)[:, None, None]).sum(0) * np.pi / n
            acvf.append(np.abs(lhs - gam.at(h)).max())
    worst["periodogram/ACVF"] = (max(acvf), 1e-10)
    worst["grid sum = Gamma(0)"] = (max(grid), 1e-10)

    routes, szego = [], []
    M = 4096
    w = -np.pi + 2 * np.pi * np.arange(M) / M
    for name in sorted(FAMILIES):
        fam = FAMILIES[name]
        sm = build_sampled(fam.build(fam.default_theta0), 1.0)
        f1 = spectral_density_grid(sm, w)
        P = np.linalg.inv(pi_batch(sm, np.exp(-1j * w)))
        f2 = P @ sm.V @ P.conj().transpose(0, 2, 1) / (2 * np.pi)
        routes.append(np.abs(f1 - f2).max())
        szego.append(abs(np.linalg.slogdet(2 * np.pi * f1)[1].mean() - np.linalg.slogdet(sm.V)[1]))
    worst["two spectral routes"] = (max(routes), 1e-8)
    worst["log-det identity"] = (max(szego), 1e-6)

    def builder(s):
        return lambda t: ContinuousModel(build_carma21(t).A, build_carma21(t).B, [[1.0, 0.0]], [[s]])

    th = np.array([-2.0, -2.0, -1.0])
    scale = []
    for _ in range(5):
        g = periodogram(rng.standard_normal(200))
        v1 = adjusted_whittle_objective(g, th, ParamSpace(th - 1, th + 1, builder(1.0)))
        for s in (0.01, 7.0):
            vs = adjusted_whittle_objective(g, th, ParamSpace(th - 1, th + 1, builder(s)))
            scale.append(abs(vs - v1) / max(1.0, abs(v1)))
    worst["adjusted scale invariance"] = (max(scale), 1e-12)

    elapsed = time.perf_counter() - t0
    note(request, "; ".join(f"{k} {v:.1e} (tol {t:.0e})" for k, (v, t) in worst.items())
         + f"; {elapsed:.0f}s")
    assert elapsed < 300
    for k, (v, tol) in worst.items():
        assert v <= tol, k


# ---------------------------------------------------------------------------
# 6. Determinism of the study command

@pytest.mark.criterion(6)
def test_criterion_6_study_determinism(request, tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("family = carma21\ntheta0 = [-2, -2, -1]\nsample_sizes = [64, 200]\n"
                   "replicates = 8\nestimators = [whittle, adjusted, qmle]\ndriver = nig\n")
    outs = []
    for k, threads in enumerate((1, 1, 8)):
        out = tmp_path / f"r{k}.csv"
        assert main(["study", "--config", str(cfg), "--out", str(out), "--seed", "99",
                     "--threads", str(threads)]) == 0
        outs.append(out.read_bytes())
    same = outs[0] == outs[1], outs[0] == outs[2]
    note(request, f"run 1 vs run 2 identical: {same[0]}; threads 1 vs 8 identical: {same[1]}; "
                  f"{len(outs[0])} bytes")
    assert all(same)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
