"""Prediction regions from leave-one-out ensembles, plus coverage scoring.

Two region constructions share the same ensemble input. The per-coordinate
construction takes order statistics of {prediction_j - residual_j} and
{prediction_j + residual_j} at each grid time, pairing each leave-one-out
model with its own held-out residual. The standardized construction scales
residuals by their per-coordinate RMS, takes one calibration quantile of the
standardized sample, and centers a symmetric band on the median
leave-one-out prediction.

alpha is the raw tail parameter: lower bounds use level alpha, upper bounds
level 1-alpha, so two-sided coverage is guaranteed at 1-2*alpha. The CLI's
--level flag converts percent coverage to this alpha.
"""

import csv
import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .datagen import Dataset
from .exceptions import (
    DegenerateSigmaWarning,
    EmptySample,
    GridMismatch,
    NotUnivariate,
    ParseError,
)
from .ode import integrate_states, observe_matrix

__all__ = [
    "METHOD_NAMES",
    "PredictionRegion",
    "CalibrationSummary",
    "CoverageResult",
    "empirical_quantile",
    "cuqdyn1",
    "cuqdyn2",
    "jackknife_plus",
    "coverage_eval",
    "write_region_csv",
    "read_region_csv",
]

METHOD_NAMES = frozenset({"cuqdyn1", "cuqdyn2", "jackknife_plus"})


@dataclass(frozen=True)
class CalibrationSummary:
    """Calibration byproducts of the standardized construction."""

    sigma: np.ndarray
    q: Union[float, np.ndarray]
    n_cal: int
    degenerate: Union[bool, np.ndarray] = False

    def __post_init__(self):
        if np.any(self.sigma < 0) or np.any(np.asarray(self.q) < 0):
            raise ValueError("sigma and q must be nonnegative")


@dataclass(frozen=True)
class PredictionRegion:
    """Per-time, per-coordinate prediction band.

    ``center`` is the median leave-one-out prediction for the standardized
    method and the full-data fit's prediction otherwise. ``calibration`` is
    populated by the standardized method only.
    """

    times: np.ndarray
    lpb: np.ndarray
    upb: np.ndarray
    alpha: float
    method: str
    center: np.ndarray
    calibration: Optional[CalibrationSummary] = None

    def __post_init__(self):
        m = self.times.shape[0]
        for name in ("lpb", "upb", "center"):
            a = getattr(self, name)
            if a.ndim != 2 or a.shape[0] != m:
                raise ValueError(f"{name} must be (len(times), n_y)")
        if not np.all(self.lpb <= self.upb):
            raise ValueError("lower bounds exceed upper bounds")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.method not in METHOD_NAMES:
            raise ValueError(
                f"method must be one of {sorted(METHOD_NAMES)}, got {self.method!r}"
            )

    @property
    def n_y(self):
        return self.lpb.shape[1]

    @property
    def width(self):
        return self.upb - self.lpb


@dataclass(frozen=True)
class CoverageResult:
    """Fraction of truth values inside the band, t0 row excluded."""

    fraction: float
    per_coordinate: np.ndarray
    mean_width: float


# -- quantiles -----------------------------------------------------------------


def _order_index(m, level, tail):
    # conservative (m+1)-adjusted order statistic, clipped to the sample
    if tail == "upper":
        idx = math.ceil(level * (m + 1))
    elif tail == "lower":
        idx = math.floor(level * (m + 1))
    else:
        raise ValueError("tail must be 'lower' or 'upper'")
    return min(max(idx, 1), m) - 1


def empirical_quantile(sample, level, tail="upper", conservative=True):
    """Order-statistic quantile with the finite-sample-conservative rule.

    Upper tail takes the ceil(level*(m+1))-th smallest value, lower tail the
    floor(level*(m+1))-th, both clipped into the sample. With
    ``conservative=False`` this is a plain interpolated quantile instead
    (sensitivity studies only; the coverage guarantee needs the adjusted
    rule).

    Examples
    --------
    >>> empirical_quantile([1, 2, 3, 4], 0.95, tail="upper")
    4.0
    >>> empirical_quantile([1, 2, 3, 4], 0.05, tail="lower")
    1.0
    """
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise EmptySample("quantile of an empty sample")
    if not 0.0 <= level <= 1.0:
        raise ValueError("level must be in [0, 1]")
    if not conservative:
        return float(np.quantile(sample, level))
    return float(np.sort(sample)[_order_index(sample.size, level, tail)])


# -- shared region plumbing ----------------------------------------------------


def _region_grid(ens, grid):
    if grid is None:
        return ens.dataset.times
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D time vector")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid times must be strictly increasing")
    if grid[0] < ens.dataset.times[0]:
        raise ValueError("grid starts before the dataset's initial time")
    return grid


def _predict_grid(ens, theta, grid):
    # integration always starts at the dataset t0, where x0 is defined
    t0 = ens.dataset.times[0]
    if grid[0] == t0:
        eval_times = grid
        drop = 0
    else:
        eval_times = np.concatenate(([t0], grid))
        drop = 1
    states = integrate_states(ens.model, theta, eval_times, ens.optimizer.integrator)
    obs = observe_matrix(ens.model, states, theta, eval_times)
    return obs[drop:]


def _loo_predictions(ens, grid):
    if np.array_equal(grid, ens.dataset.times):
        return ens.G
    out = np.empty((ens.n_cal, grid.size, ens.dataset.n_y))
    for j, fr in enumerate(ens.fits):
        out[j] = _predict_grid(ens, fr.theta_hat, grid)
    return out

def _pin_t0(ens, grid, lpb, upb, center):
    # the initial observation is exact: zero-width band at t0
    at_t0 = grid == ens.dataset.times[0]
    if np.any(at_t0):
        y0 = ens.dataset.y[0]
        lpb[at_t0] = y0
        upb[at_t0] = y0
        center[at_t0] = y0


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")


# -- region constructions ------------------------------------------------------


def cuqdyn1(ens, grid=None, alpha=0.05, conservative=True):
    """Per-coordinate paired-residual region on ``grid``.

    At each grid time and coordinate, the lower bound is the level-alpha
    lower-tail quantile of {prediction_j - residual_j} over the
    leave-one-out fits j, and the upper bound the level-(1-alpha) upper-tail
    quantile of {prediction_j + residual_j}. Residual j stays paired with
    model j.

    Parameters
    ----------
    ens : LooEnsemble
    grid : array or None
        Evaluation times; defaults to the dataset grid.
    alpha : float
        Tail level; two-sided coverage is guaranteed at 1 - 2*alpha.
    conservative : bool
        Use the (m+1)-adjusted order statistics (default). False switches
        to plain quantiles and voids the finite-sample guarantee.

    Returns
    -------
    PredictionRegion
    """
    _check_alpha(alpha)
    grid = _region_grid(ens, grid)
    P = _loo_predictions(ens, grid)
    E = ens.E[:, None, :]
    if conservative:
        m = P.shape[0]
        lpb = np.sort(P - E, axis=0)[_order_index(m, alpha, "lower")]
        upb = np.sort(P + E, axis=0)[_order_index(m, 1.0 - alpha, "upper")]
    else:
        lpb = np.quantile(P - E, alpha, axis=0)
        upb = np.quantile(P + E, 1.0 - alpha, axis=0)
    center = _predict_grid(ens, ens.full_fit.theta_hat, grid)
    _pin_t0(ens, grid, lpb, upb, center)
    return PredictionRegion(
        times=grid, lpb=lpb, upb=upb, alpha=alpha, method="cuqdyn1", center=center
    )


def jackknife_plus(ens, grid=None, alpha=0.05, conservative=True):
    """Classic paired leave-one-out region; univariate observables only.

    Identical to :func:`cuqdyn1` for single-coordinate models; exists as a
    separately named baseline. Raises NotUnivariate otherwise.
    """
    if ens.dataset.n_y > 1:
        raise NotUnivariate(
            f"jackknife_plus needs a single observable, got {ens.dataset.n_y}"
        )
    region = cuqdyn1(ens, grid=grid, alpha=alpha, conservative=conservative)
    return dataclasses.replace(region, method="jackknife_plus")


def cuqdyn2(ens, grid=None, alpha=0.05, pooling="global", conservative=True):
    """Standardized symmetric region centered on the median LOO prediction.

    Residuals are scaled by their per-coordinate RMS sigma_k; the band is
    median_j(prediction_j) +/- q * sigma_k with q the upper-tail quantile at
    1-alpha of the standardized residuals, pooled over coordinates
    ("global", default) or taken per coordinate ("per_coordinate").

    Coordinates with sigma_k = 0 get a zero-width band at the median; they
    are flagged in the CalibrationSummary, excluded from the pooled sample,
    and reported via DegenerateSigmaWarning.
    """
    _check_alpha(alpha)
    if pooling not in ("global", "per_coordinate"):
        raise ValueError("pooling must be 'global' or 'per_coordinate'")
    grid = _region_grid(ens, grid)
    E = ens.E
    n_cal, n_y = E.shape
    sigma = np.sqrt(np.mean(E * E, axis=0))
    degenerate = sigma == 0.0
    if np.any(degenerate):
        warnings.warn(
            f"zero residual spread in coordinate(s) {np.where(degenerate)[0].tolist()}; "
            "their bands have zero width",
            DegenerateSigmaWarning,
        )

    def upper_q(z):
        if z.size == 0:
            return 0.0
        return empirical_quantile(z, 1.0 - alpha, tail="upper", conservative=conservative)

    z = E[:, ~degenerate] / sigma[~degenerate]
    if pooling == "global":
        q = upper_q(z)
        half = q * sigma
    else:
        q = np.zeros(n_y)
        for col, k in enumerate(np.where(~degenerate)[0]):
            q[k] = upper_q(z[:, col])
        half = q * sigma

    P = _loo_predictions(ens, grid)
    center = np.median(P, axis=0)
    lpb = center - half
    upb = center + half
    _pin_t0(ens, grid, lpb, upb, center)
    return PredictionRegion(
        times=grid,
        lpb=lpb,
        upb=upb,
        alpha=alpha,
        method="cuqdyn2",
        center=center,
        calibration=CalibrationSummary(
            sigma=sigma, q=q, n_cal=n_cal, degenerate=degenerate
        ),
    )


# -- coverage ------------------------------------------------------------------


def coverage_eval(region, truth):
    """Score ``truth`` against the region.

    The first grid row is excluded: it is the exactly-known initial point,
    pinned to zero width, and would bias coverage upward.

    Parameters
    ----------
    region : PredictionRegion
    truth : Dataset or array
        Observations on the region's grid; a matrix must be
        (len(times), n_y).

    Returns
    -------
    CoverageResult
        Overall fraction covered, per-coordinate fractions, mean band width.

    Raises
    ------
    GridMismatch
        Truth grid or shape does not line up with the region grid.
    """
    if isinstance(truth, Dataset):
        if not np.array_equal(truth.times, region.times):
            raise GridMismatch("truth dataset grid differs from region grid")
        values = truth.y
    else:
        values = np.asarray(truth, dtype=float)
        if values.shape != region.lpb.shape:
            raise GridMismatch(
                f"truth shape {values.shape} != region shape {region.lpb.shape}"
            )
    inside = (region.lpb[1:] <= values[1:]) & (values[1:] <= region.upb[1:])
    width = region.upb[1:] - region.lpb[1:]
    return CoverageResult(
        fraction=float(np.mean(inside)),
        per_coordinate=np.mean(inside, axis=0),
        mean_width=float(np.mean(width)),
    )


# -- region CSV ----------------------------------------------------------------

_REGION_HEADER = ["t", "y", "x_nom", "lpb", "upb"]


def _sidecar_path(path):
    path = str(path)
    root, dot, ext = path.rpartition(".")
    return f"{root}_full.{ext}" if dot else f"{path}_full"


def _write_blocks(path, region, y, x_nom, lpb, upb, fmt):
    def ycell(i, k):
        # observed column is optional; blank where absent
        if y is None or np.isnan(y[i, k]):
            return ""
        return fmt % y[i, k]

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for k in range(region.n_y):
            if k > 0:
                fh.write("\n")
            w.writerow(_REGION_HEADER)
            for i, t in enumerate(region.times):
                w.writerow(
                    [
                        fmt % t,
                        ycell(i, k),
                        fmt % x_nom[i, k],
                        fmt % lpb[i, k],
                        fmt % upb[i, k],
                    ]
                )


def write_region_csv(path, region, y=None, x_nom=None, clip_nonnegative=False):
    """Write the region as per-coordinate blocks of `t,y,x_nom,lpb,upb`.

    One block per coordinate, blank-line separated, mirroring one
    per-coordinate results table each. ``y`` is the observed data column
    (blank where absent); ``x_nom`` a nominal trajectory, defaulting to the
    region's center. Values are written in scientific notation with 4
    significant digits; an adjacent ``*_full.csv`` sidecar keeps full
    precision. ``clip_nonnegative`` floors the printed bounds at zero.
    """
    x_nom = region.center if x_nom is None else np.asarray(x_nom, dtype=float)
    if x_nom.shape != region.lpb.shape:
        raise ValueError("x_nom shape must match the region")
    if y is not None:
        y = np.asarray(y, dtype=float)
        if y.shape != region.lpb.shape:
            raise ValueError("y shape must match the region")
    lpb, upb = region.lpb, region.upb
    if clip_nonnegative:
        lpb = np.maximum(lpb, 0.0)
        upb = np.maximum(upb, 0.0)
    _write_blocks(path, region, y, x_nom, lpb, upb, "%.3e")
    _write_blocks(_sidecar_path(path), region, y, x_nom, lpb, upb, "%.17g")


def read_region_csv(path):
    """Parse a region CSV back into per-coordinate column arrays.

    Returns a dict with "times" (from the first block) and lists "y",
    "x_nom", "lpb", "upb" holding one column vector per coordinate block.
    Blank cells read as NaN.
    """
    blocks = []
    with open(path, encoding="utf-8") as fh:
        rows = None
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if not raw:
                rows = None
                continue
            if raw == _REGION_HEADER:
                rows = []
                blocks.append(rows)
                continue
            if rows is None:
                raise ParseError(f"{path}: line {lineno}: expected a block header")
            if len(raw) != len(_REGION_HEADER):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(_REGION_HEADER)} columns"
                )
            rows.append([float(c) if c else np.nan for c in raw])
    if not blocks:
        raise ParseError(f"{path}: no region blocks found")
    arrays = [np.asarray(b, dtype=float) for b in blocks]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise ParseError(f"{path}: coordinate blocks differ in shape")
    return {
        "times": arrays[0][:, 0],
        "y": [a[:, 1] for a in arrays],
        "x_nom": [a[:, 2] for a in arrays],
        "lpb": [a[:, 3] for a in arrays],
        "upb": [a[:, 4] for a in arrays],
    }
