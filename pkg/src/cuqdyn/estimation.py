"""Parameter fitting by bounded multistart search plus leave-one-out refits.

The local search is a dependency-free Nelder-Mead working in normalized
coordinates: each free parameter maps to [0, 1], logarithmically when its
bounds span two or more decades (wide positive boxes put plausible values in
a vanishing corner of linear space). Out-of-box proposals are folded back by
reflection, so every evaluated point satisfies the bounds. Start points come
from a seeded scrambled Latin hypercube table whose first ``n_starts`` rows
are used; prefix-nested start sets make the best cost monotone in
``n_starts``.
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.stats import qmc

from .datagen import Dataset
from .exceptions import AllStartsFailed, CuqdynError, DimensionMismatch
from .ode import DEFAULT_INTEGRATOR, IntegratorConfig, integrate_states, observe_matrix

__all__ = ["FitResult", "OptimizerConfig", "LooEnsemble", "objective", "fit", "loo_fit"]

# rows of the start table; n_starts beyond this fall back to a direct sample
_LHS_TABLE_SIZE = 256
# bounds with lo = 0 get this relative floor for the log map only
_LOG_FLOOR = 1e-9
# positive boxes at least this wide (hi/lo) are searched in log scale
_LOG_SPAN = 100.0


@dataclass(frozen=True)
class FitResult:
    """Outcome of one multistart fit."""

    theta_hat: np.ndarray
    cost: float
    n_objective_evals: int
    n_starts: int
    converged: bool


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`fit` and :func:`loo_fit`.

    ``objective`` selects plain squared error ("sse") or the Gaussian
    negative log-likelihood ("gaussian_nll"). For the likelihood, ``sigma``
    is either a per-coordinate noise-scale vector or "estimate", which runs
    an initial sse fit, plugs in the per-coordinate RMS residuals, and
    refits once.
    """

    n_starts: int = 20
    max_local_iters: int = 400
    local_tol: float = 1e-10
    seed: int = 0
    objective: str = "sse"
    sigma: Union[str, np.ndarray] = "estimate"
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.max_local_iters < 1:
            raise ValueError("max_local_iters must be >= 1")
        if self.objective not in ("sse", "gaussian_nll"):
            raise ValueError("objective must be 'sse' or 'gaussian_nll'")
        if isinstance(self.sigma, str):
            if self.sigma != "estimate":
                raise ValueError("sigma must be a vector or 'estimate'")
        else:
            object.__setattr__(
                self, "sigma", np.asarray(self.sigma, dtype=float)
            )


@dataclass(frozen=True)
class LooEnsemble:
    """The n leave-one-out fits plus their predictions and residuals.

    ``G[i, j, k]`` is the prediction of the model fitted without calibration
    row i, at dataset time j, coordinate k. ``E[i, k]`` is that model's
    absolute residual at its own held-out row. The t0 row is never held out
    and contributes no residual.
    """

    model: object
    dataset: Dataset
    cal_indices: np.ndarray
    fits: tuple
    G: np.ndarray
    E: np.ndarray
    full_fit: FitResult
    optimizer: OptimizerConfig

    @property
    def n_cal(self):
        return self.cal_indices.size

    @property
    def thetas(self):
        return np.array([f.theta_hat for f in self.fits])


# -- objective ----------------------------------------------------------------


def _predicted_observables(model, theta, times, integrator):
    states = integrate_states(model, theta, times, integrator)
    return observe_matrix(model, states, theta, times)


def _resolved_sigma(cfg, n_y):
    if isinstance(cfg.sigma, str):
        raise ValueError(
            "gaussian_nll needs a numeric sigma vector here; fit() resolves "
            "sigma='estimate' via an initial sse fit"
        )
    sigma = np.broadcast_to(cfg.sigma, (n_y,)).astype(float)
    if np.any(sigma <= 0):
        raise ValueError("sigma entries must be positive")
    return sigma


def objective(theta, dataset, model, cfg=OptimizerConfig()):
    """Fit criterion at ``theta``; integrator failures map to +inf.

    sse: sum over rows and coordinates of squared residuals.
    gaussian_nll: (1/2) sum of log(2 pi sigma_k^2) + (residual/sigma_k)^2.
    """
    theta = np.asarray(theta, dtype=float)
    try:
        pred = _predicted_observables(model, theta, dataset.times, cfg.integrator)
    except CuqdynError:
        return np.inf
    resid = dataset.y - pred
    with np.errstate(over="ignore", invalid="ignore"):
        if cfg.objective == "sse":
            cost = float(np.sum(resid * resid))
        else:
            sigma = _resolved_sigma(cfg, dataset.n_y)
            z2 = (resid / sigma) ** 2
            cost = 0.5 * float(
                np.sum(np.log(2.0 * np.pi * sigma**2) * dataset.n + np.sum(z2, axis=0))
            )
    return cost if np.isfinite(cost) else np.inf


def _objective_closure(dataset, model, cfg):
    # same quantity as objective(), specialized for the optimizer loop
    times = dataset.times
    y = dataset.y
    if cfg.objective == "gaussian_nll":
        sigma = _resolved_sigma(cfg, dataset.n_y)
        const = 0.5 * dataset.n * float(np.sum(np.log(2.0 * np.pi * sigma**2)))
        w = 1.0 / sigma

        def f(theta):
            try:
                pred = _predicted_observables(model, theta, times, cfg.integrator)
            except CuqdynError:
                return np.inf
            with np.errstate(over="ignore", invalid="ignore"):
                r = (y - pred) * w
                cost = const + 0.5 * float(np.sum(r * r))
            return cost if np.isfinite(cost) else np.inf

    else:

        def f(theta):
            try:
                pred = _predicted_observables(model, theta, times, cfg.integrator)
            except CuqdynError:
                return np.inf
            with np.errstate(over="ignore", invalid="ignore"):
                r = y - pred
                cost = float(np.sum(r * r))
            return cost if np.isfinite(cost) else np.inf

    return f


# -- bounded Nelder-Mead in normalized coordinates ----------------------------


class _BoxMap:
    """Bijection between free parameters and the unit cube.

    Frozen dimensions (lo == hi) are excluded from the search and pinned.
    """

    def __init__(self, bounds):
        bounds = np.asarray(bounds, dtype=float)
        self.lo = bounds[:, 0]
        self.hi = bounds[:, 1]
        self.free = self.lo < self.hi
        lo_f = self.lo[self.free]
        hi_f = self.hi[self.free]
        lo_eff = np.where(lo_f > 0, lo_f, hi_f * _LOG_FLOOR)
        self.log_dim = (lo_f >= 0) & (hi_f > 0) & (hi_f >= _LOG_SPAN * lo_eff)
        self.lo_eff = np.where(self.log_dim, lo_eff, lo_f)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.span = np.where(
                self.log_dim, np.log(hi_f / self.lo_eff), hi_f - lo_f
            )
        self.d = int(np.sum(self.free))

    def theta(self, u):
        """Unit-cube point -> full parameter vector (frozen dims pinned)."""
        th = self.lo.copy()
        lin = self.lo_eff + u * self.span
        logv = self.lo_eff * np.exp(u * self.span)
        th[self.free] = np.where(self.log_dim, logv, lin)
        return th

    def u(self, theta):
        """Full parameter vector -> unit-cube coordinates of free dims."""
        th = np.asarray(theta, dtype=float)[self.free]
        with np.errstate(divide="ignore", invalid="ignore"):
            ulog = np.log(np.maximum(th, self.lo_eff) / self.lo_eff) / self.span
        ulin = (th - self.lo_eff) / self.span
        return np.clip(np.where(self.log_dim, ulog, ulin), 0.0, 1.0)


def _fold(u):
    # reflect out-of-box coordinates back into [0, 1] (triangle wave)
    v = np.mod(u, 2.0)
    return np.where(v > 1.0, 2.0 - v, v)


def _nelder_mead(f_unit, u0, max_iters, tol):
    """Classic simplex search on [0,1]^d with reflective folding.

    Returns (u_best, f_best, n_evals, converged). A simplex whose vertices
    have collapsed onto one point counts as converged: on flat directions
    (non-identifiable parameters) this is the expected end state, not a
    failure. The collapse test uses the simplex diameter; a determinant
    volume test would underflow at high dimension and flag healthy
    simplices.
    """
    d = u0.size
    if d == 0:
        return u0, f_unit(u0), 1, True
    alpha, gamma, rho, shrink = 1.0, 2.0, 0.5, 0.5

    verts = np.tile(u0, (d + 1, 1))
    step = 0.1
    for j in range(d):
        verts[j + 1, j] = u0[j] + step if u0[j] + step <= 1.0 else u0[j] - step
    fvals = np.array([f_unit(v) for v in verts])
    n_evals = d + 1

    converged = False
    for _ in range(max_iters):
        order = np.argsort(fvals, kind="stable")
        verts = verts[order]
        fvals = fvals[order]
        f_best, f_worst = fvals[0], fvals[-1]
        if np.isfinite(f_best):
            if (f_worst - f_best) <= tol * (1.0 + abs(f_best)):
                converged = True
                break
            diam = np.max(np.abs(verts[1:] - verts[0]))
            if diam < 1e-9:
                converged = True
                break
        centroid = np.mean(verts[:-1], axis=0)

        xr = _fold(centroid + alpha * (centroid - verts[-1]))
        fr = f_unit(xr)
        n_evals += 1
        if fr < fvals[0]:
            xe = _fold(centroid + gamma * (xr - centroid))
            fe = f_unit(xe)
            n_evals += 1
            if fe < fr:
                verts[-1], fvals[-1] = xe, fe
            else:
                verts[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            verts[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = _fold(centroid + rho * (xr - centroid))
            else:
                xc = _fold(centroid + rho * (verts[-1] - centroid))
            fc = f_unit(xc)
            n_evals += 1
            if fc < min(fr, fvals[-1]):
                verts[-1], fvals[-1] = xc, fc
            else:
                for j in range(1, d + 1):
                    verts[j] = _fold(verts[0] + shrink * (verts[j] - verts[0]))
                    fvals[j] = f_unit(verts[j])
                n_evals += d

    i = int(np.argmin(fvals))
    return verts[i], fvals[i], n_evals, converged


def _start_table(d, seed, n_starts):
    if d == 0:
        return np.zeros((n_starts, 0))
    sampler = qmc.LatinHypercube(d=d, seed=int(seed) & 0xFFFFFFFF)
    n = max(n_starts, _LHS_TABLE_SIZE)
    return sampler.random(n)[:n_starts]


def _multistart(f_unit, box, cfg):
    starts = _start_table(box.d, cfg.seed, cfg.n_starts)
    best_u = None
    best_f = np.inf
    total_evals = 0
    any_converged = False
    for u0 in starts:
        u, fv, ne, conv = _nelder_mead(f_unit, u0, cfg.max_local_iters, cfg.local_tol)
        total_evals += ne
        if np.isfinite(fv):
            any_converged = any_converged or conv
            # strict comparison: ties keep the earliest start
            if fv < best_f:
                best_f = fv
                best_u = u
    if best_u is None:
        raise AllStartsFailed(
            f"all {cfg.n_starts} starts evaluated to non-finite cost"
        )
    return best_u, best_f, total_evals, any_converged


def fit(dataset, model, cfg=OptimizerConfig()):
    """Multistart bounded fit of ``model`` parameters to ``dataset``.

    Parameters
    ----------
    dataset : Dataset
    model : OdeModel
    cfg : OptimizerConfig

    Returns
    -------
    FitResult

    Raises
    ------
    AllStartsFailed
        Every start evaluated to infinite cost everywhere it looked.
    """
    if dataset.n_y != model.n_y:
        raise DimensionMismatch(
            f"dataset has {dataset.n_y} observables, model '{model.name}' has {model.n_y}"
        )
    box = _BoxMap(model.bounds)
    pre_evals = 0
    if cfg.objective == "gaussian_nll" and isinstance(cfg.sigma, str):
        # plug-in noise scale: sse fit, per-coordinate RMS residuals, one refit
        sse_cfg = dataclasses.replace(cfg, objective="sse")
        first = fit(dataset, model, sse_cfg)
        pre_evals = first.n_objective_evals
        pred = _predicted_observables(
            model, first.theta_hat, dataset.times, cfg.integrator
        )
        rms = np.sqrt(np.mean((dataset.y - pred) ** 2, axis=0))
        floor = 1e-12 * np.maximum(1.0, np.mean(np.abs(dataset.y), axis=0))
        cfg = dataclasses.replace(cfg, sigma=np.maximum(rms, floor))

    f_theta = _objective_closure(dataset, model, cfg)

    def f_unit(u):
        return f_theta(box.theta(u))

    best_u, best_f, evals, converged = _multistart(f_unit, box, cfg)
    return FitResult(
        theta_hat=box.theta(best_u),
        cost=best_f,
        n_objective_evals=evals + pre_evals,
        n_starts=cfg.n_starts,
        converged=converged,
    )


def loo_fit(dataset, model, cfg=OptimizerConfig(), workers=None):
    """Fit once per held-out calibration row and collect the LOO ensemble.

    The t0 row is never held out (the initial observation is known exactly)
    and never produces a residual. Each leave-one-out fit runs with its own
    seed ``cfg.seed XOR row_index``, so results do not depend on execution
    order or on ``workers``.

    Parameters
    ----------
    workers : int or None
        Thread count for running the independent fits; None runs serially.

    Returns
    -------
    LooEnsemble
    """
    if dataset.n_y != model.n_y:
        raise DimensionMismatch(
            f"dataset has {dataset.n_y} observables, model '{model.name}' has {model.n_y}"
        )
    if dataset.n < 4:
        raise ValueError(
            "leave-one-out needs at least 4 rows so every refit keeps 3"
        )
    cal_indices = np.arange(1, dataset.n)

    def one(i):
        cfg_i = dataclasses.replace(cfg, seed=cfg.seed ^ int(i))
        try:
            return fit(dataset.drop_row(i), model, cfg_i)
        except AllStartsFailed as exc:
            raise AllStartsFailed(f"leave-one-out fit at row {i}: {exc}") from exc

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(one, cal_indices))
    else:
        fits = [one(i) for i in cal_indices]

    full_fit = fit(dataset, model, cfg)

    n_cal = cal_indices.size
    G = np.empty((n_cal, dataset.n, dataset.n_y))
    for j, fr in enumerate(fits):
        G[j] = _predicted_observables(
            model, fr.theta_hat, dataset.times, cfg.integrator
        )
    E = np.abs(dataset.y[cal_indices] - G[np.arange(n_cal), cal_indices])
    return LooEnsemble(
        model=model,
        dataset=dataset,
        cal_indices=cal_indices,
        fits=tuple(fits),
        G=G,
        E=E,
        full_fit=full_fit,
        optimizer=cfg,
    )
