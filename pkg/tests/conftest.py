"""Shared fixtures: JIT warmup and cached leave-one-out ensembles."""

import numpy as np
import pytest

from cuqdyn.datagen import NoiseSpec, simulate_dataset
from cuqdyn.estimation import OptimizerConfig, loo_fit
from cuqdyn.models import registry_get
from cuqdyn.ode import integrate

# throughput settings for tests that exercise the pipeline, not the optimizer
LIGHT = OptimizerConfig(n_starts=4, max_local_iters=150, local_tol=1e-8, seed=0)


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    # load the compiled kernels once so timed tests measure math, not JIT
    for name in ("logistic", "lotka_volterra", "alpha_pinene", "nfkb"):
        spec = registry_get(name)
        integrate(spec.model, spec.true_params, spec.default_grid(3))


@pytest.fixture(scope="session")
def logistic_spec():
    return registry_get("logistic")


@pytest.fixture(scope="session")
def logistic_dataset(logistic_spec):
    grid = logistic_spec.default_grid(10)
    return simulate_dataset(logistic_spec, grid, NoiseSpec(0.10, seed=11))


@pytest.fixture(scope="session")
def logistic_ensemble(logistic_spec, logistic_dataset):
    return loo_fit(logistic_dataset, logistic_spec.model, LIGHT)


@pytest.fixture(scope="session")
def lv_ensemble():
    spec = registry_get("lotka_volterra")
    ds = simulate_dataset(spec, spec.default_grid(30), NoiseSpec(0.05, seed=7))
    return loo_fit(ds, spec.model, LIGHT)
