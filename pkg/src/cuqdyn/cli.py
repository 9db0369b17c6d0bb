"""Command line entry points.

Subcommands: simulate (draw a noisy dataset CSV), fit (multistart parameter
fit), region (calibrated prediction band for a dataset), coverage
(config-driven Monte-Carlo experiment), paper-grid (benchmark suites).

Exit codes: 0 success, 1 configuration error (bad flags, bad config file,
unknown model), 2 runtime failure (integration, parsing, optimizer).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .conformal import cuqdyn1, cuqdyn2, jackknife_plus, write_region_csv
from .datagen import (
    NoiseSpec,
    load_alpha_pinene_real,
    read_csv,
    simulate_dataset,
    write_csv,
)
from .estimation import OptimizerConfig, fit as fit_params, loo_fit
from .exceptions import ConfigError, CuqdynError, UnknownModel
from .harness import (
    SCHEMA_VERSION,
    experiment_from_config,
    load_config_file,
    run_experiment,
    run_paper_grid,
)
from .models import model_names, registry_get
from .transforms import (
    apply_transform,
    invert_transform_bounds,
    parse_transform,
    transform_model,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract wants 1 for config errors
    def error(self, message):
        raise ConfigError(message)


def _add_optimizer_flags(p):
    p.add_argument("--n-starts", type=int, default=20, help="multistart count")
    p.add_argument("--max-local-iters", type=int, default=400)
    p.add_argument("--local-tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)


def _build_parser():
    parser = _Parser(prog="cuqdyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic noisy dataset CSV")
    sim.add_argument("--model", required=True, help=f"one of {model_names()}")
    sim.add_argument("--n-points", type=int, default=None, help="noisy rows (t0 row is added)")
    sim.add_argument("--noise", type=float, default=0.05, help="noise fraction, e.g. 0.05")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=_cmd_simulate)

    fit = sub.add_parser("fit", help="multistart parameter fit on a dataset")
    fit.add_argument("--model", required=True)
    fit.add_argument("--data", required=True, help="dataset CSV, or 'alpha_pinene_real'")
    fit.add_argument("--objective", choices=("sse", "gaussian_nll"), default="sse")
    fit.add_argument("--transform", default=None)
    _add_optimizer_flags(fit)
    fit.add_argument("--out", default=None, help="write fit JSON here instead of stdout")
    fit.set_defaults(func=_cmd_fit)

    reg = sub.add_parser("region", help="calibrated prediction band for a dataset")
    reg.add_argument("--model", required=True)
    reg.add_argument("--method", choices=("cuqdyn1", "cuqdyn2", "jackknife_plus"),
                     default="cuqdyn2")
    lvl = reg.add_mutually_exclusive_group()
    lvl.add_argument("--alpha", type=float, default=None,
                     help="raw tail level; two-sided coverage >= 1-2*alpha")
    lvl.add_argument("--level", type=float, default=None,
                     help="target two-sided coverage percent; 95 -> alpha 0.025")
    reg.add_argument("--pooling", choices=("global", "per_coordinate"), default="global")
    reg.add_argument("--transform", default=None)
    reg.add_argument("--data", required=True)
    reg.add_argument("--out", required=True, help="output directory")
    reg.add_argument("--clip-nonnegative", action="store_true",
                     help="floor printed bounds at zero")
    _add_optimizer_flags(reg)
    reg.set_defaults(func=_cmd_region)

    cov = sub.add_parser("coverage", help="Monte-Carlo coverage experiment from a config file")
    cov.add_argument("--config", required=True, help="flat key=value config file")
    cov.add_argument("--model", default=None)
    cov.add_argument("--n-points", dest="n_points", type=int, default=None)
    cov.add_argument("--noise", dest="noise_pct", type=float, default=None)
    cov.add_argument("--replicates", dest="n_replicates", type=int, default=None)
    cov.add_argument("--method", default=None)
    cov.add_argument("--seed", dest="master_seed", type=int, default=None)
    cov.add_argument("--out", dest="output_dir", default=None)
    cov.add_argument("--workers", type=int, default=None)
    cov.set_defaults(func=_cmd_coverage)

    pg = sub.add_parser("paper-grid", help="run a benchmark suite grid")
    pg.add_argument("--suite", required=True,
                    choices=("logistic", "lotka_volterra", "alpha_pinene", "nfkb"))
    pg.add_argument("--scale", type=float, default=1.0,
                    help="replicate-count scale factor")
    pg.add_argument("--method", choices=("cuqdyn1", "cuqdyn2", "jackknife_plus"),
                    default="cuqdyn2")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", default=".", help="output root directory")
    pg.add_argument("--workers", type=int, default=1)
    pg.set_defaults(func=_cmd_paper_grid)

    return parser


def _resolve_alpha(args):
    """Apply the --level mapping; returns (alpha, provenance string)."""
    if args.level is not None:
        level = args.level / 100.0 if args.level > 1.0 else args.level
        if not 0.0 < level < 1.0:
            raise ConfigError("--level must be in (0, 100)")
        alpha = (1.0 - level) / 2.0
        return alpha, f"level {args.level:g} -> alpha {alpha:g} (two-sided)"
    alpha = 0.05 if args.alpha is None else args.alpha
    return alpha, f"alpha {alpha:g} (raw; two-sided coverage >= {1 - 2 * alpha:g})"


def _load_dataset(arg):
    if arg == "alpha_pinene_real":
        return load_alpha_pinene_real()
    return read_csv(arg)


def _optimizer_from(args, objective="sse"):
    return OptimizerConfig(
        n_starts=args.n_starts,
        max_local_iters=args.max_local_iters,
        local_tol=args.local_tol,
        seed=args.seed,
        objective=objective,
    )


def _emit(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_simulate(args):
    spec = registry_get(args.model)
    grid = spec.default_grid(args.n_points)
    ds = simulate_dataset(spec, grid, NoiseSpec(args.noise, seed=args.seed))
    write_csv(ds, args.out)
    sys.stdout.write(f"wrote {ds.n} rows to {args.out}\n")
    return 0


def _cmd_fit(args):
    ds = _load_dataset(args.data)
    model = registry_get(args.model).model
    h = parse_transform(args.transform)
    result = fit_params(
        apply_transform(ds, h),
        transform_model(model, h),
        _optimizer_from(args, objective=args.objective),
    )
    _emit(
        {
            "schema_version": SCHEMA_VERSION,
            "model": args.model,
            "transform": h.tag,
            "objective": args.objective,
            "theta_hat": [float(v) for v in result.theta_hat],
            "cost": result.cost,
            "n_objective_evals": result.n_objective_evals,
            "n_starts": result.n_starts,
            "converged": result.converged,
        },
        args.out,
    )
    return 0


def _cmd_region(args):
    ds = _load_dataset(args.data)
    model = registry_get(args.model).model
    alpha, alpha_note = _resolve_alpha(args)
    h = parse_transform(args.transform)
    ens = loo_fit(apply_transform(ds, h), transform_model(model, h), _optimizer_from(args))
    if args.method == "cuqdyn2":
        region = cuqdyn2(ens, alpha=alpha, pooling=args.pooling)
    elif args.method == "cuqdyn1":
        region = cuqdyn1(ens, alpha=alpha)
    else:
        region = jackknife_plus(ens, alpha=alpha)
    region = invert_transform_bounds(region, h)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_region_csv(
        outdir / "region.csv", region, y=ds.y, clip_nonnegative=args.clip_nonnegative
    )
    meta = {
        "schema_version": SCHEMA_VERSION,
        "model": args.model,
        "method": args.method,
        "alpha": alpha,
        "alpha_mapping": alpha_note,
        "pooling": args.pooling if args.method == "cuqdyn2" else None,
        "transform": h.tag,
        "clip_nonnegative": bool(args.clip_nonnegative),
        "n_cal": ens.n_cal,
        "theta_hat": [float(v) for v in ens.full_fit.theta_hat],
    }
    if region.calibration is not None:
        cal = region.calibration
        q = cal.q if np.isscalar(cal.q) else [float(v) for v in np.atleast_1d(cal.q)]
        meta["calibration"] = {
            "sigma": [float(v) for v in cal.sigma],
            "q": q,
            "degenerate": [bool(b) for b in cal.degenerate],
        }
    _emit(meta, outdir / "region_meta.json")
    sys.stdout.write(f"wrote region for {ds.n} times to {outdir}\n")
    return 0


def _cmd_coverage(args):
    values = load_config_file(args.config)
    overrides = {
        "model": args.model,
        "n_points": args.n_points,
        "noise_pct": args.noise_pct,
        "n_replicates": args.n_replicates,
        "method": args.method,
        "master_seed": args.master_seed,
        "output_dir": args.output_dir,
        "workers": args.workers,
    }
    cfg = experiment_from_config(values, overrides)
    report = run_experiment(cfg)
    for tag, mean in report.mean_coverage.items():
        shown = "n/a" if mean is None else f"{mean:.3f}"
        sys.stdout.write(f"alpha {tag}: mean coverage {shown}\n")
    if report.n_failed:
        sys.stdout.write(f"{report.n_failed} replicate(s) failed\n")
    sys.stdout.write(f"report written to {cfg.output_dir}/report.json\n")
    return 0


def _cmd_paper_grid(args):
    reports = run_paper_grid(
        args.suite,
        scale=args.scale,
        output_dir=args.out,
        master_seed=args.seed,
        method=args.method,
        workers=args.workers,
    )
    for cell, report in reports.items():
        means = ", ".join(
            f"{tag}: {'n/a' if m is None else format(m, '.3f')}"
            for tag, m in report.mean_coverage.items()
        )
        sys.stdout.write(f"{cell}: coverage {means}\n")
    return 0


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, UnknownModel) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except CuqdynError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
