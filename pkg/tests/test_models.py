"""Model registry contents and helpers."""

import numpy as np
import pytest

from cuqdyn.exceptions import UnknownModel
from cuqdyn.models import (
    model_names,
    nfkb_observe,
    registry_get,
    with_initial_state,
)
from cuqdyn.ode import integrate


def test_registry_names():
    assert model_names() == ("logistic", "lotka_volterra",
                             "alpha_pinene", "nfkb")


def test_unknown_model_message_lists_choices():
    with pytest.raises(UnknownModel) as exc:
        registry_get("lorenz")
    msg = str(exc.value)
    assert "lorenz" in msg
    assert "logistic" in msg


def test_logistic_entry():
    s = registry_get("logistic")
    assert s.model.n_x == s.model.n_y == 1
    assert np.array_equal(s.true_params, [0.1, 100.0])
    assert np.array_equal(s.model.x0(s.true_params), [10.0])
    assert s.default_horizon == (0.0, 100.0)
    assert s.model.bounds.tolist() == [[1e-3, 1.0], [1.0, 1000.0]]


def test_lotka_volterra_entry():
    s = registry_get("lotka_volterra")
    assert s.model.n_x == s.model.n_y == 2
    assert np.array_equal(s.true_params, [0.5, 0.02, 0.5, 0.02])
    assert np.array_equal(s.model.x0(s.true_params), [10.0, 5.0])
    assert s.default_horizon == (0.0, 30.0)


def test_alpha_pinene_entry():
    s = registry_get("alpha_pinene")
    assert s.model.n_x == s.model.n_y == 5
    assert np.allclose(
        s.true_params, [5.93e-5, 2.96e-5, 2.05e-5, 2.75e-4, 4.00e-5]
    )
    assert np.array_equal(s.model.x0(s.true_params), [100.0, 0, 0, 0, 0])
    assert s.default_horizon == (0.0, 36420.0)
    assert np.all(s.model.bounds[:, 0] == 0.0)
    assert np.all(s.model.bounds[:, 1] == 1.0)


def test_nfkb_entry():
    s = registry_get("nfkb")
    m = s.model
    assert (m.n_x, m.n_y, m.n_theta) == (15, 6, 29)
    x0 = m.x0(s.true_params)
    assert x0[0] == pytest.approx(0.2)
    assert x0[12] == pytest.approx(0.06)
    assert np.count_nonzero(x0) == 2
    # rates that are zero in the reference parameterisation stay pinned
    zero = s.true_params == 0.0
    assert np.all(m.bounds[zero, 0] == 0.0)
    assert np.all(m.bounds[zero, 1] == 0.0)
    nz = ~zero
    assert np.allclose(m.bounds[nz, 0], s.true_params[nz] / 50.0)
    assert np.allclose(m.bounds[nz, 1], s.true_params[nz] * 50.0)


def test_nfkb_observe_hand_case():
    # single states except the two totals, which sum their components
    x = np.arange(1.0, 16.0)
    out = nfkb_observe(x)
    assert out.shape == (6,)
    expect = [x[6], x[9] + x[12], x[8], x[0] + x[1] + x[2], x[1], x[11]]
    assert np.array_equal(out, expect)
    # matrix input maps row-wise
    batch = nfkb_observe(np.stack([x, 2.0 * x]))
    assert batch.shape == (2, 6)
    assert np.array_equal(batch[1], 2.0 * out)


def test_default_grid_shapes():
    s = registry_get("logistic")
    g = s.default_grid()
    assert len(g) == 11 and g[0] == 0.0 and g[-1] == 100.0
    assert np.allclose(np.diff(g), 10.0)
    g13 = registry_get("nfkb").default_grid()
    assert len(g13) == 13 and g13[-1] == 3600.0
    g5 = s.default_grid(4)
    assert len(g5) == 5


def test_with_initial_state_overrides_x0():
    s = registry_get("logistic")
    pinned = with_initial_state(s.model, np.array([25.0]))
    traj = integrate(pinned, s.true_params, s.default_grid(4))
    assert traj.observables[0, 0] == 25.0
    # original model untouched
    assert registry_get("logistic").model.x0(s.true_params)[0] == 10.0
    # compiled stepper still used after wrapping
    traj2 = integrate(s.model, s.true_params, s.default_grid(4))
    assert traj.observables[1, 0] != traj2.observables[1, 0]


def test_with_initial_state_validates_shape():
    s = registry_get("lotka_volterra")
    with pytest.raises(Exception):
        with_initial_state(s.model, np.array([1.0, 2.0, 3.0]))


def test_bounds_contain_true_params():
    for name in model_names():
        s = registry_get(name)
        assert np.all(s.true_params >= s.model.bounds[:, 0])
        assert np.all(s.true_params <= s.model.bounds[:, 1])
