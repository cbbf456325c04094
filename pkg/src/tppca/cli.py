"""Command-line interface.

Subcommands: generate, fit, angle, experiment, reproduce-tables, figure-data.
Parameter files are JSON, datasets are CSV (optional trailing ``outlier``
column), experiment reports are CSV plus a JSON manifest sufficient to re-run
them exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional

import numpy as np

from . import __version__
from .cl_mcem import McemControl, fit_cl_mcem, fit_conditional_t
from .experiments import (
    BUILTIN_NAMES,
    builtin_config,
    config_from_dict,
    emit_figure_data,
    format_summary,
    reproduce_tables,
    run_experiment,
    save_report,
)
from .generators import (
    OutlierSpec,
    gen_cl,
    gen_conditional,
    gen_experiment,
    gen_marginal,
)
from .io import load_dataset, load_params, params_to_dict, save_dataset, save_params
from .marginal_t import EmControl, fit_marginal_em, loglik_marginal
from .metrics import first_principal_angle, orthonormalize
from .params import Dataset, DofSpec, ModelParams
from .standard import fit_standard

_MODEL_CHOICES = ("standard", "marginal-t", "conditional-t", "cl-t")


def _common_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, default=0, help="root random seed (default 0)")
    sp.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker count for replicate-parallel commands (default 1)",
    )
    sp.add_argument("--out", required=True, help="output file or directory")


def _dof_from_args(model: str, args) -> DofSpec:
    lo, hi = args.nu_lower, args.nu_upper
    if model == "standard":
        return DofSpec.gaussian()
    if model == "cl-t":
        if args.fix_nu:
            return DofSpec.pair(args.nu1, args.nu2)
        return DofSpec.pair_estimated(args.nu1, args.nu2, lo, hi)
    if args.fix_nu:
        return DofSpec.single(args.nu)
    return DofSpec.single_estimated(args.nu, lo, hi)


def _add_dof_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--nu", type=float, default=5.0, help="dof (init when estimated)")
    sp.add_argument("--nu1", type=float, default=5.0, help="data-layer dof for cl-t")
    sp.add_argument("--nu2", type=float, default=5.0, help="latent-layer dof for cl-t")
    sp.add_argument(
        "--fix-nu", action="store_true", help="fix the dof instead of estimating"
    )
    sp.add_argument("--nu-lower", type=float, default=0.05, help="dof bracket lower end")
    sp.add_argument("--nu-upper", type=float, default=500.0, help="dof bracket upper end")


def _cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.model == "experiment":
        data = gen_experiment(
            args.q,
            args.n_clean,
            args.rho,
            OutlierSpec(args.n_outliers, args.halfwidth),
            rng,
            seed=args.seed,
        )
        sidecar = {
            "kind": "experiment",
            "q": args.q,
            "n_clean": args.n_clean,
            "rho": args.rho,
            "outliers": {"count": args.n_outliers, "box_halfwidth": args.halfwidth},
            "seed": args.seed,
        }
    else:
        if not args.params:
            print(
                f"generate --model {args.model} requires --params", file=sys.stderr
            )
            return 2
        params = load_params(args.params)
        sampler = {
            "cl-t": gen_cl,
            "conditional-t": gen_conditional,
            "standard": gen_conditional,
            "marginal-t": gen_marginal,
        }[args.model]
        samples = sampler(params, args.n, rng)
        data = Dataset(X=samples.x, seed=args.seed)
        sidecar = {
            "kind": args.model,
            "params": params_to_dict(params),
            "n": args.n,
            "seed": args.seed,
        }
    save_dataset(data, args.out)
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(f"wrote {data.n} rows to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    data = load_dataset(args.data)
    dof = _dof_from_args(args.model, args)
    rng = np.random.default_rng(args.seed)
    if args.model == "standard":
        result = fit_standard(data, args.d)
    elif args.model == "marginal-t":
        result = fit_marginal_em(
            data, args.d, dof, EmControl(tol=args.tol, max_iter=args.max_iter), rng
        )
    else:
        ctrl = McemControl(
            B=args.mc_draws,
            burn_in=args.burn_in,
            max_iter=args.max_iter,
            param_tol=args.param_tol,
            window=args.window,
            nu_bracket=(args.nu_lower, args.nu_upper),
        )
        fitter = fit_conditional_t if args.model == "conditional-t" else fit_cl_mcem
        result = fitter(data, args.d, dof, ctrl, rng)
    save_params(result.params, args.out)
    if args.trace_csv:
        with open(args.trace_csv, "w") as fh:
            fh.write("iteration,objective,param_delta\n")
            for t in result.trace:
                fh.write(f"{t.iteration},{t.objective!r},{t.param_delta!r}\n")
    p = result.params
    print(
        f"{args.model}: {result.n_iter} iterations, "
        f"{'converged' if result.converged else 'not converged'}"
    )
    if p.dof.variant == "single":
        print(f"nu = {p.dof.nu:.4g}")
        print(f"marginal loglik = {loglik_marginal(p, data):.6f}"
              if args.model == "marginal-t" else f"sigma2 = {p.sigma2:.6g}")
    elif p.dof.variant == "pair":
        nu1, nu2 = p.dof.nu_pair
        print(f"nu1 = {nu1:.4g}, nu2 = {nu2:.4g}")
    print(f"wrote parameters to {args.out}")
    return 0


def _load_basis(path: str) -> np.ndarray:
    if path.endswith(".json"):
        return load_params(path).W
    with open(path) as fh:
        first = fh.readline()
        try:
            [float(v) for v in first.replace(",", " ").split()]
            skip = 0
        except ValueError:
            skip = 1
    return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)


def _cmd_angle(args) -> int:
    a = orthonormalize(_load_basis(args.first))
    b = orthonormalize(_load_basis(args.second))
    theta = first_principal_angle(a, b)
    print(f"{theta:.6f}")
    if args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(f"{theta!r}\n")
    return 0


def _cmd_experiment(args) -> int:
    if args.builtin:
        cfg = builtin_config(args.builtin)
    else:
        with open(args.config) as fh:
            cfg = config_from_dict(json.load(fh))
    if args.replicates is not None:
        cfg = dataclasses.replace(cfg, n_replicates=args.replicates)
    if args.seed is not None and args.override_seed:
        cfg = dataclasses.replace(cfg, root_seed=args.seed)
    report = run_experiment(cfg, n_jobs=args.threads)
    save_report(report, args.out)
    print(format_summary(report))
    print(f"report written to {args.out}")
    return 0


def _cmd_reproduce_tables(args) -> int:
    out = reproduce_tables(
        args.out,
        only=args.only or None,
        n_replicates=args.replicates,
        n_jobs=args.threads,
    )
    for name, report in out["reports"].items():
        print(format_summary(report))
    print("wrote: " + ", ".join(out["paths"]))
    return 0


def _cmd_figure_data(args) -> int:
    if args.params:
        params = load_params(args.params)
    else:
        dof = {
            "cl-t": DofSpec.pair(args.nu, args.nu),
            "conditional-t": DofSpec.single(args.nu),
            "marginal-t": DofSpec.single(args.nu),
            "standard": DofSpec.gaussian(),
        }[args.model]
        params = ModelParams(
            W=np.array([[2.0], [1.0]]),
            mu=np.zeros(2),
            sigma2=args.sigma2,
            dof=dof,
        )
    manifest = emit_figure_data(
        args.model, params, args.n, args.window, args.out, args.seed
    )
    print(f"wrote {manifest['n_kept']} of {args.n} points to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tppca",
        description="Robust probabilistic PCA under multivariate t distributions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    sp.add_argument(
        "--model",
        choices=_MODEL_CHOICES + ("experiment",),
        default="experiment",
        help="generative model, or 'experiment' for clean-plus-outlier data",
    )
    sp.add_argument("--params", help="JSON parameter file (model samplers)")
    sp.add_argument("--n", type=int, default=10000, help="sample count (model samplers)")
    sp.add_argument("--q", type=int, default=2, help="dimension (experiment data)")
    sp.add_argument("--n-clean", type=int, default=200, help="clean rows (experiment)")
    sp.add_argument("--rho", type=float, default=0.5, help="correlation (experiment)")
    sp.add_argument("--n-outliers", type=int, default=20, help="outlier rows (experiment)")
    sp.add_argument(
        "--halfwidth", type=float, default=10.0, help="outlier box halfwidth (experiment)"
    )
    _common_flags(sp)
    sp.set_defaults(func=_cmd_generate)

    sp = sub.add_parser("fit", help="fit a model to a CSV dataset")
    sp.add_argument("--model", choices=_MODEL_CHOICES, required=True)
    sp.add_argument("--data", required=True, help="CSV dataset path")
    sp.add_argument("--d", type=int, default=1, help="latent dimension")
    _add_dof_flags(sp)
    sp.add_argument("--tol", type=float, default=1e-6, help="EM loglik tolerance")
    sp.add_argument("--max-iter", type=int, default=None, help="iteration cap")
    sp.add_argument("--mc-draws", type=int, default=100, help="MCEM retained draws (base)")
    sp.add_argument("--burn-in", type=int, default=5, help="MCEM burn-in per E-step")
    sp.add_argument("--param-tol", type=float, default=1e-4, help="MCEM stopping tol")
    sp.add_argument("--window", type=int, default=5, help="MCEM stopping window")
    sp.add_argument("--trace-csv", help="write the per-iteration trace here")
    _common_flags(sp)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("angle", help="first principal angle between two subspaces")
    sp.add_argument("first", help="JSON parameter file or CSV basis matrix")
    sp.add_argument("second", help="JSON parameter file or CSV basis matrix")
    _common_flags(sp)
    sp.set_defaults(func=_cmd_angle)

    sp = sub.add_parser("experiment", help="run a replicated simulation experiment")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="experiment config JSON")
    group.add_argument("--builtin", choices=BUILTIN_NAMES, help="builtin experiment")
    sp.add_argument("--replicates", type=int, help="override the replicate count")
    sp.add_argument(
        "--override-seed",
        action="store_true",
        help="replace the config's root seed with --seed",
    )
    _common_flags(sp)
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser(
        "reproduce-tables", help="run the builtin experiments and tabulate results"
    )
    sp.add_argument(
        "--only", nargs="*", choices=BUILTIN_NAMES, help="subset of experiments"
    )
    sp.add_argument("--replicates", type=int, help="reduced replicate count")
    _common_flags(sp)
    sp.set_defaults(func=_cmd_reproduce_tables)

    sp = sub.add_parser("figure-data", help="emit plot-ready generated points")
    sp.add_argument("--model", choices=_MODEL_CHOICES, required=True)
    sp.add_argument("--params", help="JSON parameter file (default: the 2-d demo params)")
    sp.add_argument("--sigma2", type=float, default=0.5, help="noise scale (default params)")
    sp.add_argument("--nu", type=float, default=3.0, help="dof (default params)")
    sp.add_argument("--n", type=int, default=10000, help="points to generate")
    sp.add_argument("--window", type=float, default=100.0, help="output window halfwidth")
    _common_flags(sp)
    sp.set_defaults(func=_cmd_figure_data)

    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "fit" and args.max_iter is None:
        args.max_iter = 500 if args.model == "marginal-t" else 100
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
