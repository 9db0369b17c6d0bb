"""Conformal prediction bands for deterministic nonlinear ODE models.

Pipeline: simulate or load a time-series dataset, fit model parameters once
per held-out point (leave-one-out), then turn the prediction/residual
ensemble into finite-sample-calibrated bands. Regions carry a two-sided
coverage guarantee of 1 - 2*alpha regardless of how well the model is
specified or identified.

The sklearn-style entry point is ConformalOdePredictor; the functional API
lives in the submodules (datagen, estimation, conformal, harness) and the
``cuqdyn`` CLI mirrors it.
"""

from . import exceptions
from .conformal import (
    CalibrationSummary,
    CoverageResult,
    PredictionRegion,
    coverage_eval,
    cuqdyn1,
    cuqdyn2,
    empirical_quantile,
    jackknife_plus,
    read_region_csv,
    write_region_csv,
)
from .datagen import Dataset, NoiseSpec, load_alpha_pinene_real, read_csv, simulate_dataset, write_csv
from .estimation import FitResult, LooEnsemble, OptimizerConfig, fit, loo_fit, objective
from .estimator import ConformalOdePredictor
from .harness import (
    SCHEMA_VERSION,
    CoverageReport,
    ExperimentConfig,
    run_experiment,
    run_paper_grid,
)
from .models import ModelSpec, model_names, registry_get, with_initial_state
from .ode import DEFAULT_INTEGRATOR, IntegratorConfig, OdeModel, Trajectory, integrate, logistic_closed_form
from .transforms import Transform, apply_transform, invert_transform_bounds, parse_transform, transform_model

__version__ = "0.1.0"

__all__ = [
    "CalibrationSummary",
    "ConformalOdePredictor",
    "CoverageReport",
    "CoverageResult",
    "DEFAULT_INTEGRATOR",
    "Dataset",
    "ExperimentConfig",
    "FitResult",
    "IntegratorConfig",
    "LooEnsemble",
    "ModelSpec",
    "NoiseSpec",
    "OdeModel",
    "OptimizerConfig",
    "PredictionRegion",
    "SCHEMA_VERSION",
    "Trajectory",
    "Transform",
    "apply_transform",
    "coverage_eval",
    "cuqdyn1",
    "cuqdyn2",
    "empirical_quantile",
    "exceptions",
    "fit",
    "integrate",
    "invert_transform_bounds",
    "jackknife_plus",
    "load_alpha_pinene_real",
    "logistic_closed_form",
    "loo_fit",
    "model_names",
    "objective",
    "parse_transform",
    "read_csv",
    "read_region_csv",
    "registry_get",
    "run_experiment",
    "run_paper_grid",
    "simulate_dataset",
    "transform_model",
    "with_initial_state",
    "write_csv",
    "write_region_csv",
    "__version__",
]
