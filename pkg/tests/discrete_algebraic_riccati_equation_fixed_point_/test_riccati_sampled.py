"""Riccati fixed point, Kalman gain and the sampled state space quantities."""

import numpy as np
import pytest

from mcarma_whittle.exceptions import DegeneracyError, InvalidInputError, InvertibilityError
from mcarma_whittle.linalg import (
    kalman_gain,
    matrix_exp,
    noise_covariance,
    riccati_residual,
    solve_riccati,
    stationary_covariance,
)
from mcarma_whittle.sampled import (
    ContinuousModel,
    build_sampled,
    phi_batch,
    pi_batch,
    pi_inverse_batch,
    pi_polynomial,
    transfer_phi,
)
from mcarma_whittle.zoo import FAMILIES, THETA0_MCAR1, THETA0_MCARMA21, build_mcar1_biv, build_mcarma21_biv

UNIT_CIRCLE = np.exp(2j * np.pi * np.arange(64) / 64)


def brute_riccati(eAD, S, C, iters):
    """Plain fixed-point iteration started at the stationary covariance."""
    Om = stationary_covariance(eAD, S)
    for _ in range(iters):
        G = eAD @ Om @ C.T
        Om = eAD @ Om @ eAD.T + S - G @ np.linalg.inv(C @ Om @ C.T) @ G.T
    return Om


def ou_model(a=-1.0, s2=1.0):
    return ContinuousModel([[a]], [[1.0]], [[1.0]], [[s2]])


class TestRiccati:
    def test_identity_observation(self):
        m = build_mcar1_biv(THETA0_MCAR1)
        eAD = matrix_exp(m.A, 1.0)
        S = noise_covariance(m.A, m.B, m.sigma_L, 1.0)
        Om = solve_riccati(eAD, S, np.eye(2))
        np.testing.assert_allclose(Om, S, atol=1e-14)
        assert riccati_residual(eAD, S, np.eye(2), Om) <= 1e-14

    def test_scalar_ou_against_long_iteration(self):
        sm = build_sampled(ou_model(), 1.0)
        Om_ref = brute_riccati(sm.eAD, sm.sigma_N, sm.C, 10**4)
        assert abs(sm.omega[0, 0] - Om_ref[0, 0]) <= 1e-10
        # K = e^{-1} since Omega = Sigma_N for C = 1
        assert abs(sm.K[0, 0] - np.exp(-1)) <= 1e-10

    def test_carma21_against_long_iteration(self):
        sm = build_sampled(FAMILIES["carma21"].build((-2, -2, -1)), 1.0)
        Om_ref = brute_riccati(sm.eAD, sm.sigma_N, sm.C, 20_000)
        assert np.max(np.abs(sm.omega - Om_ref)) <= 1e-10
        G = sm.eAD @ Om_ref @ sm.C.T
        K_ref = G / (sm.C @ Om_ref @ sm.C.T)
        assert np.max(np.abs(sm.K - K_ref)) <= 1e-10

    def test_mcarma21_residual_and_psd(self):
        sm = build_sampled(build_mcarma21_biv(THETA0_MCARMA21), 1.0)
        assert riccati_residual(sm.eAD, sm.sigma_N, sm.C, sm.omega) <= 1e-10
        assert np.linalg.eigvalsh(sm.omega).min() >= -1e-12
        assert sm.filter_radius < 1 - 1e-8

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_residual_all_families(self, name):
        fam = FAMILIES[name]
        sm = build_sampled(fam.build(fam.default_theta0), 1.0)
        assert riccati_residual(sm.eAD, sm.sigma_N, sm.C, sm.omega) <= 1e-10

    def test_degenerate_observation(self):
        with pytest.raises(DegeneracyError):
            solve_riccati(0.5 * np.eye(2), np.eye(2), np.zeros((1, 2)))


class TestKalmanGain:
    def test_identity_observation(self):
        m = build_mcar1_biv(THETA0_MCAR1)
        sm = build_sampled(m, 1.0)
        np.testing.assert_allclose(sm.K, sm.eAD, atol=1e-13)
        np.testing.assert_allclose(sm.V, sm.sigma_N, atol=1e-14)
        assert np.max(np.abs(sm.F)) <= 1e-13

    def test_invertibility_violation(self):
        # a non-minimum-phase Omega: the gain leaves eAD - KC with radius >= 1
        eAD = np.array([[2.0, 0.0], [0.0, 0.5]])
        with pytest.raises(InvertibilityError) as exc:
            kalman_gain(eAD, np.eye(2), np.array([[0.0, 1.0]]))
        assert exc.value.spectral_radius >= 1


class TestTransferFunctions:
    def test_phi_geometric_series(self):
        m = ContinuousModel([[-np.log(2)]], [[1.0]], [[1.0]], [[1.0]])
        sm = build_sampled(m, 1.0)
        assert transfer_phi(sm, 1.0)[0, 0] == pytest.approx(2.0, rel=1e-14)

    def test_phi_truncated_series(self):
        sm = build_sampled(ou_model(-0.3), 1.0)
        z = np.exp(0.7j)
        series = sum(sm.eAD[0, 0] ** j * z**j for j in range(2000))
        assert abs(transfer_phi(sm, z)[0, 0] - series) <= 1e-10

    def test_phi_rejects_off_circle(self):
        with pytest.raises(InvalidInputError):
            transfer_phi(build_sampled(ou_model(), 1.0), 0.5)

    def test_mcar1_phi_equals_pi_inverse(self):
        sm = build_sampled(build_mcar1_biv(THETA0_MCAR1), 1.0)
        P = phi_batch(sm, UNIT_CIRCLE)
        Q = pi_inverse_batch(sm, UNIT_CIRCLE)
        assert np.max(np.abs(P - Q)) <= 1e-10

    def test_pi_at_zero(self):
        sm = build_sampled(build_mcarma21_biv(THETA0_MCARMA21), 1.0)
        np.testing.assert_array_equal(pi_polynomial(sm, 0.0), np.eye(2))

    def test_pi_scalar_ou(self):
        sm = build_sampled(ou_model(), 1.0)
        z = np.exp(1.3j) * 0.8
        assert abs(pi_polynomial(sm, z)[0, 0] - (1 - np.exp(-1) * z)) <= 1e-14

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_pi_times_truncated_inverse(self, name):
        fam = FAMILIES[name]
        sm = build_sampled(fam.build(fam.default_theta0), 1.0)
        # truncated moving-average series I + C sum_{j>=1} eAD^{j-1} K z^j
        z = UNIT_CIRCLE
        acc = np.broadcast_to(np.eye(sm.m, dtype=complex), (len(z), sm.m, sm.m)).copy()
        P = np.eye(sm.N)
        for j in range(1, 3000):
            acc += (sm.C @ P @ sm.K)[None] * (z**j)[:, None, None]
            P = P @ sm.eAD
            if np.abs(P).max() < 1e-18:
                break
        prod = pi_batch(sm, z) @ acc
        assert np.max(np.abs(prod - np.eye(sm.m))) <= 1e-10

    def test_pi_rejects_outside_disc(self):
        with pytest.raises(InvalidInputError):
            pi_polynomial(build_sampled(ou_model(), 1.0), 1.5)

    def test_without_innovations(self):
        sm = build_sampled(ou_model(), 1.0, innovations=False)
        assert sm.K is None
        with pytest.raises(InvalidInputError):
            pi_batch(sm, 0.5)
