"""Synthetic noisy datasets, the bundled real dataset, and CSV I/O.

Noise model: independent Gaussians per observation with a per-coordinate
standard deviation proportional to the coordinate's mean level over the
noise-free trajectory, ``sigma_k = epsilon * mean_i y_k(t_i)``. The first row
(t0) is never perturbed; the initial observation is treated as known
everywhere in the package.
"""

import importlib.resources
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DimensionMismatch, ParseError
from .ode import DEFAULT_INTEGRATOR, integrate

__all__ = [
    "Dataset",
    "NoiseSpec",
    "simulate_dataset",
    "read_csv",
    "write_csv",
    "load_alpha_pinene_real",
]


@dataclass(frozen=True)
class Dataset:
    """Time grid plus an (n, n_y) observation matrix.

    Rows are canonicalized to time order on construction, so any row
    permutation of the same records builds an identical Dataset. Duplicate
    times are rejected; at least 3 rows are required (leave-one-out fitting
    needs two calibration points after a removal, plus the fixed t0 row).
    """

    times: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if times.ndim != 1 or y.ndim != 2 or y.shape[0] != times.size:
            raise DimensionMismatch(
                f"times {times.shape} and y {y.shape} must be (n,) and (n, n_y)"
            )
        if times.size < 3:
            raise ValueError("a dataset needs at least 3 rows")
        order = np.argsort(times, kind="stable")
        times = times[order]
        y = y[order]
        if not np.all(np.diff(times) > 0):
            raise ValueError("dataset times must be distinct")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(y)):
            raise ValueError("dataset entries must be finite")
        times.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.times.size

    @property
    def n_y(self):
        return self.y.shape[1]

    def drop_row(self, i):
        """Dataset without row ``i``; used by leave-one-out refits."""
        keep = np.arange(self.n) != i
        return Dataset(self.times[keep], self.y[keep], dict(self.meta))


@dataclass(frozen=True)
class NoiseSpec:
    """Noise fraction and RNG seed for dataset generation."""

    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def _rng(seed, *stream):
    # counter-based generator; the key encodes (seed, stream tags) so draws
    # are reproducible regardless of generation order or worker count
    return np.random.Generator(np.random.Philox(key=np.uint64(seed), counter=list(stream) + [0] * (4 - len(stream))))


def noise_sigma(observables, epsilon):
    """Per-coordinate noise scale: epsilon times the mean observable level."""
    mu = np.mean(np.asarray(observables, dtype=float), axis=0)
    return epsilon * np.abs(mu)


def simulate_dataset(spec, grid, noise, integrator=DEFAULT_INTEGRATOR):
    """Draw a synthetic noisy dataset from a registry entry.

    Parameters
    ----------
    spec : ModelSpec
        Model and generating parameters (``spec.true_params``).
    grid : array-like
        Strictly increasing sampling times, ``grid[0]`` = t0.
    noise : NoiseSpec
        Noise fraction and seed. The t0 row is returned noise free.

    Returns
    -------
    Dataset
        With meta keys model, epsilon, seed, transform.
    """
    traj = integrate(spec.model, spec.true_params, grid, integrator)
    y_clean = traj.observables
    sigma = noise_sigma(y_clean, noise.epsilon)
    y = y_clean.copy()
    if noise.epsilon > 0:
        gen = _rng(noise.seed, 1)
        draws = gen.standard_normal(size=(y.shape[0] - 1, y.shape[1]))
        y[1:] += draws * sigma
    meta = {
        "model": spec.model.name,
        "epsilon": float(noise.epsilon),
        "seed": int(noise.seed),
        "transform": "identity",
    }
    return Dataset(traj.times, y, meta)


def write_csv(dataset, path):
    """Write ``t,y1,...,y{n_y}`` rows with 17 significant digits, LF endings."""
    n_y = dataset.n_y
    header = "t," + ",".join(f"y{k + 1}" for k in range(n_y))
    lines = [header]
    for t, row in zip(dataset.times, dataset.y):
        lines.append(",".join(f"{v:.17g}" for v in (t, *row)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path, meta=None):
    """Read a dataset written by :func:`write_csv`.

    Raises
    ------
    ParseError
        Malformed header, non-numeric value or wrong column count; the
        message names the offending 1-based row.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    if header[0] != "t" or len(header) < 2:
        raise ParseError(f"{path}: row 1: header must be t,y1,...,y<n>")
    expected = [f"y{k + 1}" for k in range(len(header) - 1)]
    if header[1:] != expected:
        raise ParseError(f"{path}: row 1: observable columns must be {expected}")
    n_cols = len(header)
    times = []
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != n_cols:
            raise ParseError(
                f"{path}: row {i}: expected {n_cols} columns, got {len(cells)}"
            )
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"{path}: row {i}: {exc}") from None
        times.append(vals[0])
        rows.append(vals[1:])
    return Dataset(np.array(times), np.array(rows), dict(meta or {}))


def load_alpha_pinene_real():
    """The classic 9-point measured isomerization dataset (5 observables).

    The t0 row holds the measured initial concentrations, which differ from
    the registry's synthetic initial state; fitting should pin the model's
    initial state to that row (see ``models.with_initial_state``).
    """
    ref = importlib.resources.files("cuqdyn.data").joinpath("alpha_pinene_real.csv")
    with importlib.resources.as_file(ref) as path:
        return read_csv(
            path,
            meta={"model": "alpha_pinene", "epsilon": None, "seed": None,
                  "transform": "identity", "source": "real"},
        )
