"""Config-driven Monte-Carlo coverage experiments and the benchmark grid.

One experiment = one (model, grid size, noise level) cell: for each
replicate, draw a noisy dataset, build the leave-one-out ensemble, form
regions at each alpha, and score them against a freshly drawn noisy
observation set at the same times. Artifacts are deterministic functions of
the master seed; wall-clock goes to a separate run log so rerun trees
compare byte-identical.
"""

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conformal import coverage_eval, cuqdyn1, cuqdyn2, jackknife_plus, write_region_csv
from .datagen import NoiseSpec, simulate_dataset
from .estimation import OptimizerConfig, loo_fit
from .exceptions import ConfigError, CuqdynError
from .models import registry_get
from .ode import integrate
from .transforms import (
    apply_transform,
    invert_transform_bounds,
    parse_transform,
    transform_model,
)

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "CoverageReport",
    "run_experiment",
    "run_paper_grid",
    "load_config_file",
    "experiment_from_config",
]

SCHEMA_VERSION = 1

_METHODS = {"cuqdyn1": cuqdyn1, "cuqdyn2": cuqdyn2, "jackknife_plus": jackknife_plus}

# benchmark grid: sizes count noisy points; noise levels are fractions
_SUITES = {
    "logistic": {"sizes": (10, 20, 50, 100), "noises": (0.0, 0.01, 0.05, 0.10), "reps": 50},
    "lotka_volterra": {"sizes": (30, 60, 120), "noises": (0.0, 0.01, 0.05, 0.10), "reps": 50},
    "alpha_pinene": {"sizes": (10, 20, 50, 100), "noises": (0.0, 0.01, 0.05, 0.10), "reps": 50},
    # single scenario; noise level is this package's documented assumption
    "nfkb": {"sizes": (12,), "noises": (0.05,), "reps": 5},
}

# grid runs favor throughput; the guarantee needs symmetry, not optimality
_GRID_OPTIMIZER = OptimizerConfig(n_starts=4, max_local_iters=150, local_tol=1e-8)


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte-Carlo coverage experiment."""

    model: str
    n_points: int
    noise_pct: float
    n_replicates: int
    alphas: tuple = (0.05,)
    method: str = "cuqdyn2"
    pooling: str = "global"
    transform: str = "identity"
    optimizer: OptimizerConfig = OptimizerConfig()
    master_seed: int = 0
    output_dir: str = "."
    truth: str = "noisy"
    workers: int = 1

    def __post_init__(self):
        registry_get(self.model)
        if self.n_points < 3:
            # the grid adds a t0 row; leave-one-out needs 4 rows total
            raise ConfigError("n_points must be at least 3")
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be at least 1")
        if not self.alphas or not all(0.0 < a < 1.0 for a in self.alphas):
            raise ConfigError("alphas must be a nonempty list within (0, 1)")
        if self.method not in _METHODS:
            raise ConfigError(f"method must be one of {sorted(_METHODS)}")
        if self.pooling not in ("global", "per_coordinate"):
            raise ConfigError("pooling must be 'global' or 'per_coordinate'")
        if self.noise_pct < 0:
            raise ConfigError("noise_pct must be nonnegative")
        if self.truth not in ("noisy", "noiseless"):
            raise ConfigError("truth must be 'noisy' or 'noiseless'")
        parse_transform(self.transform)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))


@dataclass
class CoverageReport:
    """Aggregated coverage over replicates, one entry set per alpha."""

    coverage: dict
    mean_coverage: dict
    coverage_quantiles: dict
    mean_width: dict
    n_failed: int
    failures: list
    wall_clock: dict
    config: dict

    def replicate_count(self):
        first = next(iter(self.coverage.values()), [])
        return len(first) + self.n_failed


def _derive_seed(master, replicate, stage):
    # stage: 0 noise draw, 1 fitting, 2 truth draw for scoring
    ss = np.random.SeedSequence([int(master), int(replicate), int(stage)])
    return int(ss.generate_state(1)[0])


def _alpha_tag(alpha):
    return f"{alpha:g}"


def _config_echo(cfg):
    # output_dir deliberately omitted: rerun trees must compare byte-identical
    opt = cfg.optimizer
    sigma = opt.sigma if isinstance(opt.sigma, str) else list(np.asarray(opt.sigma))
    return {
        "model": cfg.model,
        "n_points": cfg.n_points,
        "noise_pct": cfg.noise_pct,
        "n_replicates": cfg.n_replicates,
        "alphas": list(cfg.alphas),
        "method": cfg.method,
        "pooling": cfg.pooling,
        "transform": parse_transform(cfg.transform).tag,
        "truth": cfg.truth,
        "master_seed": cfg.master_seed,
        "alpha_semantics": "two-sided coverage >= 1-2*alpha; --level L maps to alpha=(1-L/100)/2",
        "optimizer": {
            "n_starts": opt.n_starts,
            "max_local_iters": opt.max_local_iters,
            "local_tol": opt.local_tol,
            "seed": opt.seed,
            "objective": opt.objective,
            "sigma": sigma,
        },
    }


def _run_replicate(cfg, spec, grid, x_nom, transform, r):
    out = {"replicate": r, "error": None}
    t0 = time.perf_counter()
    dataset = simulate_dataset(
        spec, grid, NoiseSpec(cfg.noise_pct, seed=_derive_seed(cfg.master_seed, r, 0))
    )
    out["y"] = dataset.y
    t1 = time.perf_counter()
    try:
        model = transform_model(spec.model, transform)
        fit_cfg = dataclasses.replace(cfg.optimizer, seed=_derive_seed(cfg.master_seed, r, 1))
        ens = loo_fit(apply_transform(dataset, transform), model, fit_cfg)
    except CuqdynError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        out["t_sim"], out["t_fit"], out["t_region"] = t1 - t0, time.perf_counter() - t1, 0.0
        return out
    t2 = time.perf_counter()

    if cfg.truth == "noisy":
        truth = simulate_dataset(
            spec, grid, NoiseSpec(cfg.noise_pct, seed=_derive_seed(cfg.master_seed, r, 2))
        ).y
    else:
        truth = x_nom

    regions, covs = {}, {}
    for alpha in cfg.alphas:
        if cfg.method == "cuqdyn2":
            region = cuqdyn2(ens, alpha=alpha, pooling=cfg.pooling)
        else:
            region = _METHODS[cfg.method](ens, alpha=alpha)
        region = invert_transform_bounds(region, transform)
        regions[alpha] = region
        covs[alpha] = coverage_eval(region, truth)
    out["regions"], out["coverage"] = regions, covs
    out["t_sim"], out["t_fit"], out["t_region"] = t1 - t0, t2 - t1, time.perf_counter() - t2
    return out


def run_experiment(cfg):
    """Run the experiment, write artifacts under cfg.output_dir.

    Writes per-replicate region CSVs (4-digit table plus full-precision
    sidecar), an aggregate ``report.json``, and ``run_log.txt`` holding the
    wall-clock lines. Failed replicates are recorded and excluded from the
    aggregates; they never abort the run.

    Returns
    -------
    CoverageReport
    """
    spec = registry_get(cfg.model)
    transform = parse_transform(cfg.transform)
    grid = spec.default_grid(cfg.n_points)
    nominal = integrate(spec.model, spec.true_params, grid)
    x_nom = nominal.observables

    t_start = time.perf_counter()
    run = lambda r: _run_replicate(cfg, spec, grid, x_nom, transform, r)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, range(cfg.n_replicates)))
    else:
        results = [run(r) for r in range(cfg.n_replicates)]
    results.sort(key=lambda d: d["replicate"])

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    coverage = {a: [] for a in cfg.alphas}
    widths = {a: [] for a in cfg.alphas}
    failures = []
    wall = {"simulate": 0.0, "fit": 0.0, "regions": 0.0}
    for res in results:
        r = res["replicate"]
        wall["simulate"] += res["t_sim"]
        wall["fit"] += res["t_fit"]
        wall["regions"] += res["t_region"]
        if res["error"] is not None:
            failures.append({"replicate": r, "error": res["error"]})
            continue
        for alpha in cfg.alphas:
            cov = res["coverage"][alpha]
            coverage[alpha].append(cov.fraction)
            widths[alpha].append(cov.mean_width)
            write_region_csv(
                outdir / f"rep{r:03d}_alpha{_alpha_tag(alpha)}.csv",
                res["regions"][alpha],
                y=res["y"],
                x_nom=x_nom,
            )
    wall["total"] = time.perf_counter() - t_start

    report = CoverageReport(
        coverage={_alpha_tag(a): coverage[a] for a in cfg.alphas},
        mean_coverage={
            _alpha_tag(a): (float(np.mean(v)) if v else None)
            for a, v in coverage.items()
        },
        coverage_quantiles={
            _alpha_tag(a): (
                [float(q) for q in np.quantile(v, [0.25, 0.5, 0.75])] if v else None
            )
            for a, v in coverage.items()
        },
        mean_width={
            _alpha_tag(a): (float(np.mean(v)) if v else None)
            for a, v in widths.items()
        },
        n_failed=len(failures),
        failures=failures,
        wall_clock=wall,
        config=_config_echo(cfg),
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": report.config,
        "coverage": report.coverage,
        "mean_coverage": report.mean_coverage,
        "coverage_quantiles": report.coverage_quantiles,
        "mean_width": report.mean_width,
        "n_failed": report.n_failed,
        "failures": report.failures,
    }
    (outdir / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    log = [f"{stage} {seconds:.3f}s" for stage, seconds in wall.items()]
    (outdir / "run_log.txt").write_text("\n".join(log) + "\n", encoding="utf-8")
    return report


def run_paper_grid(
    suite,
    scale=1.0,
    output_dir=".",
    master_seed=0,
    method="cuqdyn2",
    alphas=(0.05,),
    optimizer=None,
    workers=1,
):
    """Run one benchmark suite's (size x noise) grid of experiments.

    ``scale`` shrinks replicate counts (never below 1) for desk-scale runs.
    Artifacts land under ``output_dir/<suite>/n<size>_noise<pct>/``; a
    ``summary.json`` indexes the cells. Returns {cell name: CoverageReport}.
    """
    if suite not in _SUITES:
        raise ConfigError(f"suite must be one of {sorted(_SUITES)}")
    if scale <= 0:
        raise ConfigError("scale must be positive")
    design = _SUITES[suite]
    optimizer = _GRID_OPTIMIZER if optimizer is None else optimizer
    root = Path(output_dir) / suite
    reports = {}
    cells = []
    for size in design["sizes"]:
        for noise in design["noises"]:
            cell = f"n{size}_noise{int(round(noise * 100))}"
            cell_seed = int(
                np.random.SeedSequence(
                    [int(master_seed), int(size), int(round(noise * 10000))]
                ).generate_state(1)[0]
            )
            cfg = ExperimentConfig(
                model=suite,
                n_points=size,
                noise_pct=noise,
                n_replicates=max(1, round(design["reps"] * scale)),
                alphas=tuple(alphas),
                method=method,
                optimizer=optimizer,
                master_seed=cell_seed,
                output_dir=str(root / cell),
                workers=workers,
            )
            report = run_experiment(cfg)
            reports[cell] = report
            cells.append(
                {
                    "cell": cell,
                    "n_points": size,
                    "noise_pct": noise,
                    "n_replicates": cfg.n_replicates,
                    "mean_coverage": report.mean_coverage,
                    "mean_width": report.mean_width,
                    "n_failed": report.n_failed,
                }
            )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "suite": suite,
        "scale": scale,
        "method": method,
        "alphas": list(alphas),
        "master_seed": master_seed,
        "cells": cells,
    }
    (root / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return reports


# -- config file ---------------------------------------------------------------


def load_config_file(path):
    """Parse a flat `key = value` config file into a string dict.

    Blank lines and #-comments are skipped. Keys may repeat only the last
    value wins, matching common INI behavior. Values stay strings; typing
    happens in experiment_from_config.
    """
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


_EXPERIMENT_KEYS = {
    "model": str,
    "n_points": int,
    "noise_pct": float,
    "n_replicates": int,
    "method": str,
    "pooling": str,
    "transform": str,
    "master_seed": int,
    "output_dir": str,
    "truth": str,
    "workers": int,
}
_OPTIMIZER_KEYS = {
    "n_starts": int,
    "max_local_iters": int,
    "local_tol": float,
    "seed": int,
    "objective": str,
}


def experiment_from_config(values, overrides=None):
    """Build an ExperimentConfig from string maps; overrides win.

    ``values`` comes from load_config_file; ``overrides`` carries CLI flag
    values (already typed, None entries ignored).
    """
    merged = dict(values)
    for key, val in (overrides or {}).items():
        if val is not None:
            merged[key] = val
    kwargs = {}
    opt_kwargs = {}
    for key, raw in merged.items():
        try:
            if key == "alphas":
                kwargs["alphas"] = (
                    tuple(float(v) for v in raw.split(","))
                    if isinstance(raw, str)
                    else tuple(float(v) for v in raw)
                )
            elif key in _EXPERIMENT_KEYS:
                kwargs[key] = _EXPERIMENT_KEYS[key](raw)
            elif key.startswith("optimizer."):
                sub = key[len("optimizer."):]
                if sub == "sigma":
                    opt_kwargs["sigma"] = (
                        [float(v) for v in raw.split(",")]
                        if isinstance(raw, str) and raw != "estimate"
                        else raw
                    )
                elif sub in _OPTIMIZER_KEYS:
                    opt_kwargs[sub] = _OPTIMIZER_KEYS[sub](raw)
                else:
                    raise ConfigError(f"unknown optimizer key '{key}'")
            else:
                raise ConfigError(f"unknown config key '{key}'")
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}': {raw}") from exc
    if opt_kwargs:
        kwargs["optimizer"] = OptimizerConfig(**opt_kwargs)
    if "model" not in kwargs:
        raise ConfigError("config needs at least 'model'")
    kwargs.setdefault("n_points", registry_get(kwargs["model"]).default_n)
    kwargs.setdefault("noise_pct", 0.05)
    kwargs.setdefault("n_replicates", 1)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
