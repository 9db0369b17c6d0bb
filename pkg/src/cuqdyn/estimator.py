"""Scikit-learn style front end over the fitting and region machinery.

fit(X, y) treats X as observation times and y as the observed trajectory,
runs the leave-one-out ensemble fit, and predict_interval() returns
calibrated bands on any time grid. Hyperparameters follow sklearn
conventions (set in __init__, work in fit, fitted state in trailing
underscore attributes), so the estimator composes with clone(),
get_params/set_params, and joblib-style model selection utilities.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .conformal import coverage_eval, cuqdyn1, cuqdyn2, jackknife_plus
from .datagen import Dataset
from .estimation import OptimizerConfig, loo_fit
from .models import ModelSpec, registry_get
from .ode import OdeModel
from .transforms import (
    apply_transform,
    invert_transform_bounds,
    parse_transform,
    transform_model,
)

__all__ = ["ConformalOdePredictor"]

_METHODS = {"cuqdyn1": cuqdyn1, "cuqdyn2": cuqdyn2, "jackknife_plus": jackknife_plus}


class ConformalOdePredictor(RegressorMixin, BaseEstimator):
    """Conformal prediction bands for a parametric ODE model.

    Parameters
    ----------
    model : str, ModelSpec, or OdeModel
        Registry name or an explicit model object.
    method : {"cuqdyn1", "cuqdyn2", "jackknife_plus"}
        Region construction; see the conformal module.
    alpha : float
        Tail level; two-sided coverage is guaranteed at 1 - 2*alpha.
    pooling : {"global", "per_coordinate"}
        Quantile pooling for the standardized method.
    transform : None, str, or Transform
        Transform-both-sides observation map ("log", "box_cox:0.5", ...).
        Bands are computed in transformed space and reported back in the
        original units.
    n_starts, max_local_iters, local_tol, seed, objective, sigma
        Fitting controls, as in OptimizerConfig.
    conservative : bool
        Use the finite-sample-conservative quantile rule (default).
    workers : int or None
        Threads for the leave-one-out fits.

    Examples
    --------
    >>> import numpy as np
    >>> from cuqdyn.datagen import NoiseSpec, simulate_dataset
    >>> from cuqdyn.models import registry_get
    >>> spec = registry_get("logistic")
    >>> ds = simulate_dataset(spec, spec.default_grid(10), NoiseSpec(0.05, seed=1))
    >>> est = ConformalOdePredictor(model="logistic", n_starts=4,
    ...                             max_local_iters=150, local_tol=1e-8)
    >>> region = est.fit(ds.times, ds.y).predict_interval()
    >>> bool(np.all(region.lpb <= region.upb))
    True
    """

    def __init__(
        self,
        model="logistic",
        method="cuqdyn2",
        alpha=0.05,
        pooling="global",
        transform=None,
        n_starts=20,
        max_local_iters=400,
        local_tol=1e-10,
        seed=0,
        objective="sse",
        sigma="estimate",
        conservative=True,
        workers=None,
    ):
        self.model = model
        self.method = method
        self.alpha = alpha
        self.pooling = pooling
        self.transform = transform
        self.n_starts = n_starts
        self.max_local_iters = max_local_iters
        self.local_tol = local_tol
        self.seed = seed
        self.objective = objective
        self.sigma = sigma
        self.conservative = conservative
        self.workers = workers

    # -- plumbing --------------------------------------------------------

    def _resolve_model(self):
        if isinstance(self.model, str):
            return registry_get(self.model).model
        if isinstance(self.model, ModelSpec):
            return self.model.model
        if isinstance(self.model, OdeModel):
            return self.model
        raise TypeError("model must be a registry name, ModelSpec, or OdeModel")

    def _optimizer(self):
        return OptimizerConfig(
            n_starts=self.n_starts,
            max_local_iters=self.max_local_iters,
            local_tol=self.local_tol,
            seed=self.seed,
            objective=self.objective,
            sigma=self.sigma,
        )

    def _check_fitted(self):
        if not hasattr(self, "ensemble_"):
            raise NotFittedError("call fit(X, y) before predicting")

    @staticmethod
    def _as_times(X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        if X.ndim != 1:
            raise ValueError("X must be a 1-D vector of times (or a column)")
        return X

    # -- sklearn API -----------------------------------------------------

    def fit(self, X, y):
        """Build the leave-one-out ensemble from times X and observations y."""
        if self.method not in _METHODS:
            raise ValueError(
                f"unknown method '{self.method}'; choose from {sorted(_METHODS)}"
            )
        times = self._as_times(X)
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        h = parse_transform(self.transform)
        base = self._resolve_model()
        dataset = Dataset(times=times, y=y)
        self.transform_ = h
        self.model_ = transform_model(base, h)
        self.ensemble_ = loo_fit(
            apply_transform(dataset, h),
            self.model_,
            self._optimizer(),
            workers=self.workers,
        )
        self.theta_ = self.ensemble_.full_fit.theta_hat
        self.n_features_in_ = 1
        return self

    def predict_interval(self, X=None, alpha=None):
        """Prediction band on times X (default: the training grid).

        Returns a PredictionRegion in the original observation units.
        """
        self._check_fitted()
        grid = None if X is None else self._as_times(X)
        alpha = self.alpha if alpha is None else alpha
        if self.method not in _METHODS:
            raise ValueError(f"unknown method '{self.method}'")
        kwargs = {"alpha": alpha, "conservative": self.conservative}
        if self.method == "cuqdyn2":
            kwargs["pooling"] = self.pooling
        region = _METHODS[self.method](self.ensemble_, grid, **kwargs)
        return invert_transform_bounds(region, self.transform_)

    def predict(self, X=None):
        """Point prediction (the band center) on times X."""
        region = self.predict_interval(X)
        c = region.center
        return c[:, 0] if c.shape[1] == 1 else c

    def score(self, X, y):
        """Empirical coverage of y by the band on X (t0 row excluded)."""
        region = self.predict_interval(X)
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        return coverage_eval(region, y).fraction
