"""Simulation harness: seeded replicate experiments and their reports.

A replicate draws a contaminated dataset, takes the top eigenvectors of the
clean rows' sample covariance as the true subspace, fits each configured
model on the full data, and scores the first principal angle between fitted
and true subspaces. Replicate i always works from the random stream derived
from (root_seed, i), so serial and parallel runs of the same config produce
identical reports.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from ._start import sorted_eigh
from .cl_mcem import McemControl, fit_cl_mcem, fit_conditional_t
from .generators import (
    OutlierSpec,
    gen_cl,
    gen_conditional,
    gen_experiment,
    gen_marginal,
)
from .io import dof_from_dict, dof_to_dict, params_to_dict
from .marginal_t import EmControl, fit_marginal_em
from .metrics import Subspace, first_principal_angle, orthonormalize
from .params import Dataset, DofSpec, ModelParams
from .standard import fit_standard

MODEL_IDS = ("standard", "marginal-t", "conditional-t", "cl-t")

_DOF_VARIANTS = {
    "standard": ("gaussian",),
    "marginal-t": ("single",),
    "conditional-t": ("single", "gaussian"),
    "cl-t": ("pair",),
}


@dataclass(frozen=True)
class ModelSetting:
    """One estimator slot in an experiment: identifier, dof mode, optional
    model-specific list of subspace dimensions (defaults to the config's)."""

    model: str
    dof: DofSpec
    d_list: Optional[tuple] = None

    def __post_init__(self):
        if self.model not in MODEL_IDS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODEL_IDS}")
        if self.dof.variant not in _DOF_VARIANTS[self.model]:
            raise ValueError(
                f"model {self.model!r} cannot use a {self.dof.variant!r} dof"
            )
        if self.d_list is not None:
            object.__setattr__(self, "d_list", tuple(int(d) for d in self.d_list))


def default_model_setting(model: str, nu_init: float = 5.0) -> ModelSetting:
    """Standard dof mode for each estimator: Gaussian for standard PPCA,
    estimated dofs (initialized at ``nu_init``) for the t models."""
    if model == "standard":
        return ModelSetting(model, DofSpec.gaussian())
    if model == "marginal-t" or model == "conditional-t":
        return ModelSetting(model, DofSpec.single_estimated(nu_init))
    if model == "cl-t":
        return ModelSetting(model, DofSpec.pair_estimated(nu_init, nu_init))
    raise ValueError(f"unknown model {model!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    q: int
    d_list: tuple
    n_clean: int
    rho: float
    outliers: OutlierSpec
    n_replicates: int
    models: tuple
    root_seed: int
    em: EmControl = field(default_factory=EmControl)
    mcem: McemControl = field(default_factory=lambda: McemControl(max_iter=40))

    def __post_init__(self):
        object.__setattr__(self, "d_list", tuple(int(d) for d in self.d_list))
        object.__setattr__(self, "models", tuple(self.models))
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be at least 1")
        for d in self.all_ds():
            if not (1 <= d < self.q):
                raise ValueError(f"every d must satisfy 1 <= d < q={self.q}, got {d}")

    def slots(self):
        """Fixed enumeration of (model setting, d) fit slots."""
        out = []
        for setting in self.models:
            for d in setting.d_list if setting.d_list is not None else self.d_list:
                out.append((setting, d))
        return out

    def all_ds(self):
        return sorted({d for _, d in self.slots()})


@dataclass(frozen=True)
class ReportRow:
    """Aggregate over replicates for one (model, d) slot.

    ``angles`` has one entry per replicate, NaN marking a failed fit; the
    mean and standard error are computed over the successful entries.
    """

    model: str
    d: int
    mean_angle: float
    se: float
    angles: tuple
    n_failed: int


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple
    failures: tuple = ()

    def row(self, model: str, d: int) -> ReportRow:
        for r in self.rows:
            if r.model == model and r.d == d:
                return r
        raise KeyError(f"no report row for ({model}, d={d})")


def true_subspaces(data: Dataset, ds: Sequence[int]):
    """Top-d eigenvector spans of the clean rows' sample covariance."""
    X = data.clean_rows()
    Xc = X - X.mean(axis=0)
    S = (Xc.T @ Xc) / X.shape[0]
    _, vecs = sorted_eigh(S)
    return {d: Subspace(vecs[:, :d]) for d in ds}


def _fit_slot(setting: ModelSetting, data: Dataset, d: int, cfg: ExperimentConfig, rng):
    if setting.model == "standard":
        return fit_standard(data, d)
    if setting.model == "marginal-t":
        return fit_marginal_em(data, d, setting.dof, cfg.em, rng)
    if setting.model == "conditional-t":
        return fit_conditional_t(data, d, setting.dof, cfg.mcem, rng)
    return fit_cl_mcem(data, d, setting.dof, cfg.mcem, rng)


def _run_replicate(cfg: ExperimentConfig, i: int):
    """All fits for replicate i; returns (angles, error strings) per slot."""
    slots = cfg.slots()
    seq = np.random.SeedSequence(cfg.root_seed, spawn_key=(i,))
    streams = [np.random.default_rng(s) for s in seq.spawn(1 + len(slots))]
    data = gen_experiment(
        cfg.q, cfg.n_clean, cfg.rho, cfg.outliers, streams[0], seed=i
    )
    truths = true_subspaces(data, cfg.all_ds())
    angles = []
    errors = []
    for k, (setting, d) in enumerate(slots):
        try:
            result = _fit_slot(setting, data, d, cfg, streams[1 + k])
            angle = first_principal_angle(orthonormalize(result.params.W), truths[d])
        except (ValueError, np.linalg.LinAlgError) as exc:
            angle = math.nan
            errors.append(f"replicate {i}, {setting.model} d={d}: {exc}")
        angles.append(angle)
    return angles, errors


def run_experiment(cfg: ExperimentConfig, n_jobs: int = 1) -> ExperimentReport:
    """Run all replicates and aggregate; deterministic for any ``n_jobs``.

    Failed fits are excluded from the aggregates and counted per row, never
    silently dropped; the failure messages are kept on the report rows'
    ``angles`` as NaN entries and surfaced in the saved report.
    """
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_replicate)(cfg, i) for i in range(cfg.n_replicates)
    )
    per_slot = np.array([angles for angles, _ in results], dtype=float)
    failures = tuple(msg for _, errors in results for msg in errors)
    rows = []
    for k, (setting, d) in enumerate(cfg.slots()):
        col = per_slot[:, k]
        good = col[np.isfinite(col)]
        if good.size == 0:
            mean, se = math.nan, math.nan
        else:
            mean = float(np.mean(good))
            se = (
                float(np.std(good, ddof=1) / math.sqrt(good.size))
                if good.size > 1
                else math.nan
            )
        rows.append(
            ReportRow(
                model=setting.model,
                d=d,
                mean_angle=mean,
                se=se,
                angles=tuple(col.tolist()),
                n_failed=int(np.sum(~np.isfinite(col))),
            )
        )
    return ExperimentReport(config=cfg, rows=tuple(rows), failures=failures)


# ----------------------------------------------------------------------------
# Config serialization (manifests)


def _em_to_dict(em: EmControl) -> dict:
    return {"tol": em.tol, "max_iter": em.max_iter}


def _mcem_to_dict(m: McemControl) -> dict:
    return {
        "B": m.B,
        "burn_in": m.burn_in,
        "max_iter": m.max_iter,
        "param_tol": m.param_tol,
        "window": m.window,
        "nu_bracket": list(m.nu_bracket),
        "burn_in_first": m.burn_in_first,
        "b_growth": m.b_growth,
        "b_max": m.b_max,
    }


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "name": cfg.name,
        "q": cfg.q,
        "d_list": list(cfg.d_list),
        "n_clean": cfg.n_clean,
        "rho": cfg.rho,
        "outliers": {
            "count": cfg.outliers.count,
            "box_halfwidth": cfg.outliers.box_halfwidth,
        },
        "n_replicates": cfg.n_replicates,
        "models": [
            {
                "model": s.model,
                "dof": dof_to_dict(s.dof),
                "d_list": list(s.d_list) if s.d_list is not None else None,
            }
            for s in cfg.models
        ],
        "root_seed": cfg.root_seed,
        "em": _em_to_dict(cfg.em),
        "mcem": _mcem_to_dict(cfg.mcem),
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    mcem_doc = dict(doc["mcem"])
    mcem_doc["nu_bracket"] = tuple(mcem_doc["nu_bracket"])
    return ExperimentConfig(
        name=doc["name"],
        q=int(doc["q"]),
        d_list=tuple(doc["d_list"]),
        n_clean=int(doc["n_clean"]),
        rho=float(doc["rho"]),
        outliers=OutlierSpec(
            count=int(doc["outliers"]["count"]),
            box_halfwidth=float(doc["outliers"]["box_halfwidth"]),
        ),
        n_replicates=int(doc["n_replicates"]),
        models=tuple(
            ModelSetting(
                model=m["model"],
                dof=dof_from_dict(m["dof"]),
                d_list=tuple(m["d_list"]) if m.get("d_list") is not None else None,
            )
            for m in doc["models"]
        ),
        root_seed=int(doc["root_seed"]),
        em=EmControl(**doc["em"]),
        mcem=McemControl(**mcem_doc),
    )


def save_report(report: ExperimentReport, out_dir: str) -> None:
    """Write report.csv, angles.csv and manifest.json under ``out_dir``.

    The manifest holds everything needed to reproduce the report exactly:
    re-running ``run_experiment`` on its config yields identical numbers.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "d", "n_replicates", "n_failed", "mean_angle", "se"])
        for r in report.rows:
            w.writerow(
                [r.model, r.d, len(r.angles), r.n_failed, repr(r.mean_angle), repr(r.se)]
            )
    with open(os.path.join(out_dir, "angles.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "model", "d", "angle"])
        for r in report.rows:
            for i, a in enumerate(r.angles):
                w.writerow([i, r.model, r.d, "" if math.isnan(a) else repr(a)])
    manifest = {"package": "tppca", "version": __version__, "config": config_to_dict(report.config)}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    if report.failures:
        with open(os.path.join(out_dir, "failures.txt"), "w") as fh:
            fh.write("\n".join(report.failures) + "\n")


def format_summary(report: ExperimentReport) -> str:
    """Human-readable per-row summary of an experiment report."""
    cfg = report.config
    lines = [
        f"experiment {cfg.name}: q={cfg.q}, {cfg.n_clean} clean rows, "
        f"{cfg.outliers.count} outliers on [-{cfg.outliers.box_halfwidth:g}, "
        f"{cfg.outliers.box_halfwidth:g}]^{cfg.q}, rho={cfg.rho:g}, "
        f"{cfg.n_replicates} replicates, root seed {cfg.root_seed}"
    ]
    for r in report.rows:
        failed = f" ({r.n_failed} failed)" if r.n_failed else ""
        lines.append(
            f"  {r.model:>13s} d={r.d}: mean angle {r.mean_angle:.4f} (SE {r.se:.4f}){failed}"
        )
    return "\n".join(lines)


# ----------------------------------------------------------------------------
# Builtin configs mirroring the published simulation studies

_BUILTIN_SEEDS = {"2A": 20240211, "2B": 20240212, "20A": 20240213, "20B": 20240214}

BUILTIN_NAMES = ("2A", "2B", "20A", "20B")


def builtin_config(name: str) -> ExperimentConfig:
    """The four standard simulation setups (2A, 2B, 20A, 20B).

    All draw 200 clean rows from the equicorrelated normal with rho = 0.5.
    The A variants add 20 outliers uniform on [-10, 10]^q, the B variants 5
    outliers on [-25, 25]^q; q is 2 or 20. The 20-dimensional runs score
    subspaces of dimension 1, 2 and 3.
    """
    if name not in _BUILTIN_SEEDS:
        raise ValueError(f"unknown builtin config {name!r}; expected one of {BUILTIN_NAMES}")
    q = 2 if name.startswith("2") and not name.startswith("20") else 20
    outliers = (
        OutlierSpec(20, 10.0) if name.endswith("A") else OutlierSpec(5, 25.0)
    )
    return ExperimentConfig(
        name=name,
        q=q,
        d_list=(1,) if q == 2 else (1, 2, 3),
        n_clean=200,
        rho=0.5,
        outliers=outliers,
        n_replicates=100,
        models=(
            default_model_setting("standard"),
            default_model_setting("marginal-t"),
            default_model_setting("cl-t"),
        ),
        root_seed=_BUILTIN_SEEDS[name],
    )


# Published means and standard errors the reproduction is compared against;
# tolerance is the acceptance band half-width on the mean (None where only
# the qualitative pattern is checked).
REFERENCE_RESULTS = {
    ("2A", 1, "standard"): (0.529, 0.046, 0.15),
    ("2A", 1, "marginal-t"): (0.037, 0.003, 0.02),
    ("2A", 1, "cl-t"): (0.058, 0.016, 0.06),
    ("2B", 1, "standard"): (0.725, 0.051, 0.16),
    ("2B", 1, "marginal-t"): (0.024, 0.002, 0.01),
    ("2B", 1, "cl-t"): (0.036, 0.003, 0.02),
    ("20A", 1, "standard"): (0.456, 0.017, 0.06),
    ("20A", 1, "marginal-t"): (0.020, 0.0004, 0.005),
    ("20A", 1, "cl-t"): (0.022, 0.0004, 0.01),
    ("20A", 2, "standard"): (0.356, 0.010, None),
    ("20A", 2, "marginal-t"): (0.019, 0.0004, None),
    ("20A", 2, "cl-t"): (0.021, 0.0004, None),
    ("20A", 3, "standard"): (0.297, 0.007, None),
    ("20A", 3, "marginal-t"): (0.018, 0.0004, None),
    ("20A", 3, "cl-t"): (0.021, 0.0005, None),
    ("20B", 1, "standard"): (1.274, 0.022, 0.10),
    ("20B", 1, "marginal-t"): (0.018, 0.0004, 0.005),
    ("20B", 1, "cl-t"): (0.020, 0.0004, 0.01),
    ("20B", 2, "standard"): (1.058, 0.019, None),
    ("20B", 2, "marginal-t"): (0.017, 0.0004, None),
    ("20B", 2, "cl-t"): (0.020, 0.0004, None),
    ("20B", 3, "standard"): (0.820, 0.017, None),
    ("20B", 3, "marginal-t"): (0.015, 0.0004, None),
    ("20B", 3, "cl-t"): (0.018, 0.0005, None),
}

# How the builtin experiments map onto the published tables: (file, row label).
_TABLE_LAYOUT = {
    "2A": ("table1.csv", "Experiment 2A"),
    "2B": ("table1.csv", "Experiment 2B"),
    "20A": ("table4.csv", None),
    "20B": ("table5.csv", None),
}

_TABLE_MODELS = ("standard", "marginal-t", "cl-t")


def _cell(report: ExperimentReport, model: str, d: int) -> str:
    r = report.row(model, d)
    return f"{r.mean_angle:.3f} ({r.se:.3f})"


def reproduce_tables(
    out_dir: str,
    only: Optional[Sequence[str]] = None,
    n_replicates: Optional[int] = None,
    n_jobs: int = 1,
) -> dict:
    """Run the builtin experiments and write table CSVs plus a comparison file.

    The table files mirror the published layout (rows are experiments or
    subspace dimensions, columns are models, cells are mean with SE). The
    comparison file lists reference values beside reproduced ones with a
    pass/fail status against the tolerance; runs with a replicate count other
    than 100 are marked "reduced" and not judged.

    Returns a dict with the report per experiment name and the written paths.
    """
    names = tuple(only) if only else BUILTIN_NAMES
    for n in names:
        if n not in BUILTIN_NAMES:
            raise ValueError(f"unknown experiment {n!r}")
    os.makedirs(out_dir, exist_ok=True)
    reports = {}
    for name in names:
        cfg = builtin_config(name)
        if n_replicates is not None:
            cfg = dataclasses.replace(cfg, n_replicates=n_replicates)
        reports[name] = run_experiment(cfg, n_jobs=n_jobs)
        save_report(reports[name], os.path.join(out_dir, name))
    paths = []
    # Table files: group experiments sharing a file (the q=2 pair share one).
    by_file = {}
    for name in names:
        fname, _ = _TABLE_LAYOUT[name]
        by_file.setdefault(fname, []).append(name)
    for fname, members in by_file.items():
        path = os.path.join(out_dir, fname)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["first_principal_angle", *_TABLE_MODELS])
            for name in members:
                _, row_label = _TABLE_LAYOUT[name]
                report = reports[name]
                if row_label is not None:
                    w.writerow(
                        [row_label] + [_cell(report, m, 1) for m in _TABLE_MODELS]
                    )
                else:
                    for d in report.config.d_list:
                        w.writerow(
                            [f"d={d}"] + [_cell(report, m, d) for m in _TABLE_MODELS]
                        )
        paths.append(path)
    # Comparison file with pass/fail.
    reduced = n_replicates is not None and n_replicates != 100
    cmp_path = os.path.join(out_dir, "comparison.csv")
    with open(cmp_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "experiment",
                "d",
                "model",
                "reference_mean",
                "reference_se",
                "mean",
                "se",
                "tolerance",
                "status",
            ]
        )
        for name in names:
            report = reports[name]
            for (exp, d, model), (ref_mean, ref_se, tol) in REFERENCE_RESULTS.items():
                if exp != name:
                    continue
                try:
                    r = report.row(model, d)
                except KeyError:
                    continue
                if reduced:
                    status = "reduced"
                elif tol is None:
                    status = ""
                else:
                    status = "pass" if abs(r.mean_angle - ref_mean) <= tol else "fail"
                w.writerow(
                    [
                        name,
                        d,
                        model,
                        ref_mean,
                        ref_se,
                        f"{r.mean_angle:.4f}",
                        f"{r.se:.4f}",
                        "" if tol is None else tol,
                        status,
                    ]
                )
    paths.append(cmp_path)
    return {"reports": reports, "paths": paths}


# ----------------------------------------------------------------------------
# Figure data

_GENERATORS = {
    "cl-t": (gen_cl, ("pair",)),
    "conditional-t": (gen_conditional, ("single", "gaussian")),
    "marginal-t": (gen_marginal, ("single",)),
    "standard": (gen_conditional, ("gaussian",)),
}


def emit_figure_data(
    model_id: str,
    params: ModelParams,
    n: int,
    window: float,
    out_path: str,
    rng=None,
) -> dict:
    """Write ``n`` generated observations as plot-ready CSV, window-filtered.

    Points are generated in full first and filtered to the square
    [-window, window]^2 only at output time; a zero window yields an empty
    point file with a valid sidecar manifest (written next to ``out_path``
    with the extension ``.manifest.json``). Returns the manifest dict.
    """
    if model_id not in _GENERATORS:
        raise ValueError(f"unknown model {model_id!r}; expected one of {sorted(_GENERATORS)}")
    sampler, variants = _GENERATORS[model_id]
    if params.dof.variant not in variants:
        raise ValueError(
            f"model {model_id!r} cannot generate from a {params.dof.variant!r} dof"
        )
    if params.q != 2:
        raise ValueError("windowed scatter output requires two-dimensional data")
    if window < 0:
        raise ValueError(f"window must be nonnegative, got {window}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    samples = sampler(params, n, rng)
    keep = np.all(np.abs(samples.x) <= window, axis=1)
    X = samples.x[keep]
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2"])
        for row in X:
            w.writerow([repr(float(v)) for v in row])
    manifest = {
        "model": model_id,
        "params": params_to_dict(params),
        "n": n,
        "window": window,
        "seed": seed,
        "n_kept": int(keep.sum()),
        "points_file": os.path.basename(out_path),
    }
    manifest_path = out_path + ".manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
