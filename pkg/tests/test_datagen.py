"""Synthetic data generation and dataset IO."""

import numpy as np
import pytest

from cuqdyn.datagen import (
    Dataset,
    NoiseSpec,
    load_alpha_pinene_real,
    noise_sigma,
    read_csv,
    simulate_dataset,
    write_csv,
)
from cuqdyn.exceptions import ParseError
from cuqdyn.models import registry_get
from cuqdyn.ode import integrate


def _clean_logistic(n=10):
    spec = registry_get("logistic")
    traj = integrate(spec.model, spec.true_params, spec.default_grid(n))
    return spec, traj


def test_noise_sigma_rule():
    obs = np.array([[1.0, 10.0], [3.0, 30.0], [5.0, 20.0]])
    sig = noise_sigma(obs, 0.1)
    assert np.allclose(sig, [0.3, 2.0])
    assert np.array_equal(noise_sigma(obs, 0.0), [0.0, 0.0])


def test_simulated_noise_scale_matches_sigma_rule():
    # empirical std over replicate draws approaches epsilon * mean level
    spec, traj = _clean_logistic()
    target = noise_sigma(traj.observables, 0.05)[0]
    draws = np.stack(
        [
            simulate_dataset(spec, spec.default_grid(10), NoiseSpec(0.05, seed=s)).y[:, 0]
            for s in range(400)
        ]
    )
    resid = draws[:, 1:] - traj.observables[1:, 0]
    assert abs(resid.std() - target) / target < 0.1


def test_first_row_is_noise_free():
    spec, traj = _clean_logistic()
    for seed in (0, 3, 99):
        ds = simulate_dataset(spec, spec.default_grid(10), NoiseSpec(0.5, seed=seed))
        assert ds.y[0, 0] == traj.observables[0, 0]
        assert not np.allclose(ds.y[1:, 0], traj.observables[1:, 0])


def test_zero_noise_returns_truth():
    spec, traj = _clean_logistic()
    ds = simulate_dataset(spec, spec.default_grid(10), NoiseSpec(0.0, seed=1))
    assert np.array_equal(ds.y, traj.observables)


def test_negative_values_are_kept():
    spec = registry_get("lotka_volterra")
    ds = simulate_dataset(spec, spec.default_grid(30), NoiseSpec(1.0, seed=2))
    assert (ds.y < 0).any()


def test_same_seed_same_draw():
    spec = registry_get("logistic")
    g = spec.default_grid(10)
    a = simulate_dataset(spec, g, NoiseSpec(0.1, seed=7))
    b = simulate_dataset(spec, g, NoiseSpec(0.1, seed=7))
    c = simulate_dataset(spec, g, NoiseSpec(0.1, seed=8))
    assert np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)


def test_dataset_sorts_rows():
    times = np.array([2.0, 0.0, 1.0])
    y = np.array([[20.0], [0.0], [10.0]])
    ds = Dataset(times, y)
    assert np.array_equal(ds.times, [0.0, 1.0, 2.0])
    assert np.array_equal(ds.y[:, 0], [0.0, 10.0, 20.0])


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([0.0, 1.0]), np.zeros((2, 1)))  # too few rows
    with pytest.raises(ValueError):
        Dataset(np.array([0.0, 1.0, 1.0]), np.zeros((3, 1)))  # dup times
    with pytest.raises(ValueError):
        Dataset(np.array([0.0, 1.0, 2.0]), np.array([[0.0], [np.nan], [1.0]]))
    with pytest.raises(ValueError):
        Dataset(np.array([0.0, 1.0, 2.0]), np.zeros((4, 1)))  # shape


def test_drop_row():
    spec = registry_get("logistic")
    ds = simulate_dataset(spec, spec.default_grid(10), NoiseSpec(0.1, seed=1))
    sub = ds.drop_row(3)
    assert sub.n == ds.n - 1
    assert ds.n == 11  # original untouched
    assert np.array_equal(sub.times, np.delete(ds.times, 3))
    assert np.array_equal(sub.y, np.delete(ds.y, 3, axis=0))


def test_csv_round_trip_is_exact(tmp_path):
    spec = registry_get("lotka_volterra")
    ds = simulate_dataset(spec, spec.default_grid(30), NoiseSpec(0.3, seed=5))
    path = tmp_path / "lv.csv"
    write_csv(ds, path)
    back = read_csv(path)
    assert np.array_equal(back.times, ds.times)
    assert np.array_equal(back.y, ds.y)


def test_csv_round_trip_awkward_values(tmp_path):
    times = np.array([0.0, 1.0, 2.0])
    y = np.array([[1e-300, -3.1400000000000001], [2.5e17, 0.1], [-0.0, 7.0]])
    path = tmp_path / "x.csv"
    write_csv(Dataset(times, y), path)
    back = read_csv(path)
    assert np.array_equal(back.y, y)


def test_read_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,y1\n0,1\n1\n2,3\n")
    with pytest.raises(ParseError) as exc:
        read_csv(p)
    assert "3" in str(exc.value)  # offending line is reported
    p.write_text("t,y1\n0,one\n1,2\n2,3\n")
    with pytest.raises(ParseError):
        read_csv(p)
    p.write_text("")
    with pytest.raises(ParseError):
        read_csv(p)


def test_load_alpha_pinene_real():
    ds = load_alpha_pinene_real()
    assert ds.n == 9
    assert ds.n_y == 5
    assert ds.times[0] == 0.0
    assert ds.times[-1] == 36420.0
    assert ds.y[0, 0] == pytest.approx(105.4)
    assert ds.meta["source"] == "real"
