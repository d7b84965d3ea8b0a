"""scikit-learn conventions of :class:`WhittleEstimator`."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mcarma_whittle import WhittleEstimator
from mcarma_whittle.estimator import estimator_kind, validate_observations
from mcarma_whittle.exceptions import InvalidInputError
from mcarma_whittle.levy import SamplePath, exact_gaussian_sample
from mcarma_whittle.objectives import ParamSpace, pseudo_innovations, qmle_objective
from mcarma_whittle.optimize import ADJUSTED, QMLE, WHITTLE
from mcarma_whittle.zoo import FAMILIES, THETA0_CARMA21, build_carma21


@pytest.fixture(scope="module")
def carma_path():
    return exact_gaussian_sample(build_carma21(THETA0_CARMA21), np.eye(1), 1.0, 2000, seed=4)


@pytest.fixture(scope="module")
def fitted(carma_path):
    return WhittleEstimator("carma21", n_starts=2).fit(carma_path)


def test_params_round_trip():
    est = WhittleEstimator("car3", method="qmle", tol=1e-6)
    p = est.get_params()
    assert p["family"] == "car3" and p["method"] == "qmle" and p["tol"] == 1e-6
    est.set_params(n_starts=3)
    assert est.n_starts == 3
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est


def test_fit_returns_self_and_attributes(carma_path):
    est = WhittleEstimator("carma21", n_starts=1)
    assert est.fit(carma_path) is est
    assert est.theta_.shape == (3,)
    assert est.n_obs_ == 2000 and est.n_features_in_ == 1
    assert est.result_.estimator_kind == WHITTLE
    assert np.isfinite(est.objective_value_)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        WhittleEstimator().transform(np.ones(10))


def test_transform_predict_score(fitted, carma_path):
    Y = carma_path.observations
    xi = fitted.transform(Y)
    assert xi.shape == Y.shape
    np.testing.assert_allclose(fitted.predict(Y), Y - xi)
    sm = fitted.space_.sampled(fitted.theta_)
    np.testing.assert_array_equal(xi, pseudo_innovations(sm, Y))
    assert fitted.score(Y) == pytest.approx(-fitted.objective_value_, rel=1e-12)


def test_accepts_1d_2d_and_paths(carma_path):
    Y = carma_path.observations
    kw = dict(family="carma21", n_starts=1)
    a = WhittleEstimator(**kw).fit(Y).theta_
    b = WhittleEstimator(**kw).fit(Y[:, 0]).theta_
    c = WhittleEstimator(**kw).fit(SamplePath(Y)).theta_
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def test_deterministic(carma_path):
    a = WhittleEstimator("carma21", n_starts=3, random_state=5).fit(carma_path).theta_
    b = WhittleEstimator("carma21", n_starts=3, random_state=5).fit(carma_path).theta_
    assert a.tobytes() == b.tobytes()


def test_qmle_method(carma_path):
    est = WhittleEstimator("carma21", method="qmle", n_starts=1).fit(carma_path)
    assert est.result_.estimator_kind == QMLE
    space = ParamSpace.from_family("carma21")
    assert est.objective_value_ == qmle_objective(carma_path, est.theta_, space)
    assert np.all(np.abs(est.theta_ - THETA0_CARMA21) < 3 * np.array([0.6, 0.3, 0.12]))


def test_adjusted_car1_interval():
    y = exact_gaussian_sample(FAMILIES["car1"].build([-1.0]), np.eye(1), 1.0, 5000, seed=9)
    est = WhittleEstimator("car1", method="adjusted", n_starts=1).fit(y)
    assert est.result_.estimator_kind == ADJUSTED
    ci = est.confidence_intervals(0.95)
    # the covariance is evaluated at the estimate, so the half width is near 1.96 sqrt((e^2-1)/n)
    half = (ci[0, 1] - ci[0, 0]) / 2
    assert half == pytest.approx(0.0700, abs=0.005)
    cov = np.array([[np.e**2 - 1]])
    exact = est.confidence_intervals(0.95, cov=cov)
    assert (exact[0, 1] - exact[0, 0]) / 2 == pytest.approx(1.959963984540054 * np.sqrt((np.e**2 - 1) / 5000),
                                                            rel=1e-12)


def test_wrong_dimension(carma_path):
    with pytest.raises(InvalidInputError):
        WhittleEstimator("mcar1_biv").fit(carma_path)


def test_bad_theta_init(carma_path):
    with pytest.raises(InvalidInputError):
        WhittleEstimator("carma21", theta_init=[1.0]).fit(carma_path)


def test_validation():
    with pytest.raises(InvalidInputError):
        validate_observations(np.array([[np.nan]]))
    with pytest.raises(InvalidInputError):
        validate_observations(np.ones(1))
    assert estimator_kind("Adjusted-Whittle") == ADJUSTED
    with pytest.raises(InvalidInputError):
        estimator_kind("mle")
