"""Estimator facade: sklearn conventions over the LOO + conformal pipeline."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cuqdyn.datagen import NoiseSpec, simulate_dataset
from cuqdyn.estimator import ConformalOdePredictor
from cuqdyn.models import registry_get

FAST = dict(n_starts=4, max_local_iters=150, local_tol=1e-8, seed=0)


@pytest.fixture(scope="module")
def logistic_xy():
    spec = registry_get("logistic")
    ds = simulate_dataset(spec, spec.default_grid(10), NoiseSpec(0.1, seed=11))
    return ds.times, ds.y


@pytest.fixture(scope="module")
def fitted(logistic_xy):
    X, y = logistic_xy
    est = ConformalOdePredictor(model="logistic", method="cuqdyn1",
                                alpha=0.1, **FAST)
    return est.fit(X, y)


def test_get_params_round_trip():
    est = ConformalOdePredictor(model="lotka_volterra", alpha=0.2, n_starts=7)
    params = est.get_params()
    assert params["model"] == "lotka_volterra"
    assert params["alpha"] == 0.2
    assert params["n_starts"] == 7
    twin = clone(est)
    assert twin.get_params() == params


def test_unfitted_predict_raises(logistic_xy):
    X, _ = logistic_xy
    est = ConformalOdePredictor()
    with pytest.raises(NotFittedError):
        est.predict(X)
    with pytest.raises(NotFittedError):
        est.predict_interval()


def test_fit_exposes_state(fitted, logistic_xy):
    X, y = logistic_xy
    assert fitted.theta_.shape == (2,)
    assert fitted.ensemble_.n_cal == len(X) - 1
    assert fitted.n_features_in_ == 1
    spec = registry_get("logistic")
    assert np.all(fitted.theta_ >= spec.model.bounds[:, 0])
    assert np.all(fitted.theta_ <= spec.model.bounds[:, 1])


def test_predict_shape_univariate(fitted, logistic_xy):
    X, _ = logistic_xy
    out = fitted.predict(X)
    assert out.shape == (len(X),)
    assert np.all(np.isfinite(out))


def test_predict_interval_defaults_to_training_grid(fitted, logistic_xy):
    X, _ = logistic_xy
    region = fitted.predict_interval()
    assert np.array_equal(region.times, X)
    assert region.alpha == 0.1
    assert region.method == "cuqdyn1"
    assert np.all(region.lpb <= region.upb)


def test_predict_interval_alpha_override_nests(fitted):
    wide = fitted.predict_interval(alpha=0.05)
    tight = fitted.predict_interval(alpha=0.3)
    assert np.all(wide.lpb <= tight.lpb)
    assert np.all(tight.upb <= wide.upb)


def test_score_is_coverage(fitted, logistic_xy):
    X, y = logistic_xy
    s = fitted.score(X, y)
    assert 0.0 <= s <= 1.0
    from cuqdyn.conformal import coverage_eval

    want = coverage_eval(fitted.predict_interval(), y).fraction
    assert s == want


def test_method_dispatch(logistic_xy):
    X, y = logistic_xy
    est = ConformalOdePredictor(model="logistic", method="cuqdyn2",
                                alpha=0.1, **FAST).fit(X, y)
    region = est.predict_interval()
    assert region.method == "cuqdyn2"
    assert region.calibration is not None
    mid = 0.5 * (region.lpb[1:] + region.upb[1:])
    assert np.allclose(mid, region.center[1:], atol=1e-10)


def test_invalid_method_rejected(logistic_xy):
    X, y = logistic_xy
    est = ConformalOdePredictor(method="middle_out", **FAST)
    with pytest.raises(ValueError):
        est.fit(X, y)


def test_log_transform_returns_original_units(logistic_xy):
    X, y = logistic_xy
    est = ConformalOdePredictor(model="logistic", method="cuqdyn2",
                                alpha=0.1, transform="log", **FAST)
    est.fit(X, y)
    region = est.predict_interval()
    # bounds line up with the raw data scale, not log scale
    assert region.lpb.min() > 0.0
    assert region.upb.max() > 50.0
    assert np.all(region.lpb <= region.upb)


def test_multivariate_predict_shape():
    spec = registry_get("lotka_volterra")
    ds = simulate_dataset(spec, spec.default_grid(12), NoiseSpec(0.05, seed=5))
    est = ConformalOdePredictor(model="lotka_volterra", method="cuqdyn1",
                                alpha=0.1, n_starts=2, max_local_iters=80,
                                local_tol=1e-6, seed=0)
    est.fit(ds.times, ds.y)
    out = est.predict(ds.times)
    assert out.shape == (13, 2)
    region = est.predict_interval()
    assert region.lpb.shape == (13, 2)


def test_column_vector_times_accepted(logistic_xy):
    X, y = logistic_xy
    est = ConformalOdePredictor(model="logistic", **FAST)
    est.fit(X.reshape(-1, 1), y)
    assert est.theta_.shape == (2,)


def test_shape_mismatch_rejected(logistic_xy):
    X, y = logistic_xy
    est = ConformalOdePredictor(model="logistic", **FAST)
    with pytest.raises(ValueError):
        est.fit(X, y[:-1])
