"""Parametric ODE systems and adaptive integration on arbitrary time grids.

The integrator is an embedded Dormand-Prince 4(5) pair with an order-4
continuous extension, so trajectories are evaluated exactly at the requested
grid points without forcing steps onto them. Built-in models run through the
compiled kernels in :mod:`cuqdyn._kernels`; any other model runs through a
pure-numpy implementation of the same algorithm.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .exceptions import DimensionMismatch, NonFiniteState, StepLimitExceeded

__all__ = [
    "OdeModel",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "logistic_closed_form",
]


@dataclass(frozen=True)
class OdeModel:
    """A parametric dynamical system with an observation map.

    Parameters
    ----------
    name : str
        Identifier, e.g. for CLI selection.
    n_x, n_y, n_theta : int
        State, observable and parameter dimensions.
    rhs : callable
        ``rhs(state, params, time) -> d state / d t`` with shapes
        ``(n_x,), (n_theta,), float -> (n_x,)``. Must be pure.
    x0 : callable
        ``x0(params) -> (n_x,)`` initial state.
    observe : callable
        ``observe(state, params, time) -> (n_y,)``. Must be pure; it is also
        invoked with a ``(m, n_x)`` state matrix and, when that vectorized call
        does not produce a ``(m, n_y)`` result, applied row by row.
    bounds : ndarray
        ``(n_theta, 2)`` box of [lo, hi] per parameter.
    """

    name: str
    n_x: int
    n_y: int
    n_theta: int
    rhs: Callable
    x0: Callable
    observe: Callable
    bounds: np.ndarray

    def __post_init__(self):
        if min(self.n_x, self.n_y, self.n_theta) < 1:
            raise DimensionMismatch("n_x, n_y and n_theta must all be >= 1")
        b = np.asarray(self.bounds, dtype=float)
        if b.shape != (self.n_theta, 2):
            raise DimensionMismatch(
                f"bounds must have shape ({self.n_theta}, 2), got {b.shape}"
            )
        if np.any(b[:, 0] > b[:, 1]):
            raise ValueError("each bounds row must satisfy lo <= hi")
        object.__setattr__(self, "bounds", b)


@dataclass(frozen=True)
class IntegratorConfig:
    """Error-control settings for :func:`integrate`.

    ``initial_step=None`` selects the step automatically from the local
    derivative norms.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 10**6
    initial_step: Optional[float] = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("rel_tol and abs_tol must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.initial_step is not None and self.initial_step <= 0:
            raise ValueError("initial_step must be positive or None")


@dataclass(frozen=True)
class Trajectory:
    """Integration result sampled on a fixed grid."""

    times: np.ndarray
    states: np.ndarray
    observables: np.ndarray


DEFAULT_INTEGRATOR = IntegratorConfig()

# registry rhs function -> compiled kernel id; populated by cuqdyn.models
_KERNEL_IDS: dict = {}


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise DimensionMismatch("grid must be a 1-d vector with at least one time")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def observe_matrix(model, states, theta, times):
    """Apply ``model.observe`` to every row of a state matrix."""
    states = np.asarray(states, dtype=float)
    m = states.shape[0]
    try:
        out = np.asarray(model.observe(states, theta, times), dtype=float)
        if out.shape == (m, model.n_y):
            return out
    except Exception:
        pass
    out = np.empty((m, model.n_y))
    for i in range(m):
        out[i] = np.asarray(model.observe(states[i], theta, times[i]), dtype=float)
    return out


def integrate(model, theta, grid, cfg=DEFAULT_INTEGRATOR):
    """Integrate ``model`` at parameters ``theta`` over ``grid``.

    Parameters
    ----------
    model : OdeModel
    theta : array-like, shape (n_theta,)
        Integrated as given even outside ``model.bounds`` (a warning is
        emitted); box enforcement belongs to the optimizer.
    grid : array-like
        Strictly increasing times; ``grid[0]`` is the initial time.
    cfg : IntegratorConfig

    Returns
    -------
    Trajectory

    Raises
    ------
    StepLimitExceeded
        The step budget ran out, typically a stiff blow-up.
    NonFiniteState
        NaN/Inf appeared in the state or derivative.
    """
    grid = _check_grid(grid)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n_theta,):
        raise DimensionMismatch(
            f"theta must have shape ({model.n_theta},), got {theta.shape}"
        )
    if np.any(theta < model.bounds[:, 0]) or np.any(theta > model.bounds[:, 1]):
        warnings.warn(f"theta outside declared bounds for model '{model.name}'")
    states = integrate_states(model, theta, grid, cfg)
    obs = observe_matrix(model, states, theta, grid)
    if not np.all(np.isfinite(obs)):
        raise NonFiniteState(f"observation map produced NaN/Inf for '{model.name}'")
    return Trajectory(times=grid, states=states, observables=obs)


def integrate_states(model, theta, grid, cfg=DEFAULT_INTEGRATOR):
    """States-only integration; the fast path used by objective evaluation.

    Skips bounds checking and observation. ``grid`` must already be valid.
    """
    grid = np.ascontiguousarray(grid, dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    x0 = np.asarray(model.x0(theta), dtype=float)
    if x0.shape != (model.n_x,):
        raise DimensionMismatch(
            f"x0 must have shape ({model.n_x},), got {x0.shape}"
        )
    h0 = 0.0 if cfg.initial_step is None else float(cfg.initial_step)
    kid = _KERNEL_IDS.get(model.rhs)
    if kid is not None:
        status, states = _kernels._dp45(
            kid, x0, theta, grid, cfg.rel_tol, cfg.abs_tol, cfg.max_steps, h0
        )
    else:
        status, states = _dp45_py(
            model.rhs, x0, theta, grid, cfg.rel_tol, cfg.abs_tol, cfg.max_steps, h0
        )
    if status == _kernels.STEP_LIMIT:
        raise StepLimitExceeded(
            f"model '{model.name}' could not reach the end of the grid "
            f"within {cfg.max_steps} steps at theta={theta}"
        )
    if status == _kernels.NON_FINITE:
        raise NonFiniteState(
            f"model '{model.name}' produced NaN/Inf during integration at theta={theta}"
        )
    return states


def logistic_closed_form(t, r, K, x0):
    """Analytic logistic trajectory K*x0*e^{rt} / (K + x0*(e^{rt} - 1)).

    Evaluated in the overflow-safe form K / (1 + (K/x0 - 1) e^{-rt}).

    >>> logistic_closed_form(0.0, 0.1, 100.0, 10.0)
    10.0
    """
    if K <= 0 or x0 <= 0:
        raise ValueError("logistic closed form requires K > 0 and x0 > 0")
    t = np.asarray(t, dtype=float)
    out = K / (1.0 + (K / x0 - 1.0) * np.exp(-r * t))
    return out if out.ndim else float(out)


# -- pure-numpy fallback ------------------------------------------------------
#
# Mirrors _kernels._dp45 statement for statement (same tableau, controller and
# interpolant) so compiled and interpreted routes can be cross-checked.

_P = np.array(
    [
        [_kernels.P00, _kernels.P01, _kernels.P02, _kernels.P03],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, _kernels.P21, _kernels.P22, _kernels.P23],
        [0.0, _kernels.P31, _kernels.P32, _kernels.P33],
        [0.0, _kernels.P41, _kernels.P42, _kernels.P43],
        [0.0, _kernels.P51, _kernels.P52, _kernels.P53],
        [0.0, _kernels.P61, _kernels.P62, _kernels.P63],
    ]
)
_E = np.array(
    [_kernels.E1, 0.0, _kernels.E3, _kernels.E4, _kernels.E5, _kernels.E6, _kernels.E7]
)


def _initial_step_py(rhs, t0, x0, f0, theta, direction, rtol, atol):
    sc = atol + rtol * np.abs(x0)
    n = x0.size
    d0 = np.sqrt(np.mean((x0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    x1 = x0 + h0 * direction * f0
    f1 = np.asarray(rhs(x1, theta, t0 + h0 * direction), dtype=float)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1)


def _dp45_py(rhs, x0, theta, t_eval, rtol, atol, max_steps, h_init):
    n = x0.shape[0]
    m = t_eval.shape[0]
    X = np.empty((m, n))
    t = t_eval[0]
    tf = t_eval[m - 1]
    x = x0.astype(float).copy()
    if not np.all(np.isfinite(x)):
        return _kernels.NON_FINITE, X
    X[0] = x
    idx = 1
    if idx >= m:
        return _kernels.OK, X

    direction = 1.0 if tf > t else -1.0
    f = np.asarray(rhs(x, theta, t), dtype=float)
    if not np.all(np.isfinite(f)):
        return _kernels.NON_FINITE, X
    if h_init > 0.0:
        h = h_init
    else:
        h = _initial_step_py(rhs, t, x, f, theta, direction, rtol, atol)
    h = min(h, abs(tf - t))

    safety, beta = 0.9, 0.04
    expo1 = 0.2 - 0.75 * beta
    facc1, facc2 = 5.0, 0.1
    facold = 1e-4
    rejected = False
    K = np.empty((7, n))
    nsteps = 0
    k = _kernels

    while direction * (tf - t) > 0.0:
        nsteps += 1
        if nsteps > max_steps:
            return k.STEP_LIMIT, X
        h = min(h, abs(tf - t))
        hd = h * direction
        if t + hd == t:
            if t + (tf - t) == t:
                # remaining span below rounding resolution: snap to the end
                X[idx:] = x
                return k.OK, X
            # step size underflowed mid-span, the solution cannot advance
            return k.STEP_LIMIT, X

        K[0] = f
        K[1] = rhs(x + hd * (k.A21 * K[0]), theta, t + 0.2 * hd)
        K[2] = rhs(x + hd * (k.A31 * K[0] + k.A32 * K[1]), theta, t + 0.3 * hd)
        K[3] = rhs(x + hd * (k.A41 * K[0] + k.A42 * K[1] + k.A43 * K[2]), theta, t + 0.8 * hd)
        K[4] = rhs(
            x + hd * (k.A51 * K[0] + k.A52 * K[1] + k.A53 * K[2] + k.A54 * K[3]),
            theta,
            t + (8.0 / 9.0) * hd,
        )
        K[5] = rhs(
            x + hd * (k.A61 * K[0] + k.A62 * K[1] + k.A63 * K[2] + k.A64 * K[3] + k.A65 * K[4]),
            theta,
            t + hd,
        )
        x_new = x + hd * (k.B1 * K[0] + k.B3 * K[2] + k.B4 * K[3] + k.B5 * K[4] + k.B6 * K[5])
        t_new = t + hd
        K[6] = rhs(x_new, theta, t_new)

        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(K[6]))):
            return k.NON_FINITE, X

        e = hd * (_E @ K)
        sc = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        err = np.sqrt(np.mean((e / sc) ** 2))

        if err <= 1.0:
            while idx < m and direction * (t_eval[idx] - t_new) <= 0.0:
                sig = (t_eval[idx] - t) / hd
                pows = np.array([sig, sig**2, sig**3, sig**4])
                X[idx] = x + hd * (K.T @ (_P @ pows))
                idx += 1
            t = t_new
            x = x_new
            f = K[6].copy()
            fac11 = err**expo1
            fac = max(facc2, min(facc1, (fac11 / facold**beta) / safety))
            h_new = h / fac
            if rejected:
                h_new = min(h_new, h)
            h = h_new
            facold = max(err, 1e-4)
            rejected = False
        else:
            h = h / min(facc1, (err**expo1) / safety)
            rejected = True

    return k.OK, X
