"""File formats: JSON parameter files and CSV datasets.

Parameter files carry ``W`` as row-major nested arrays, ``mu``, ``sigma2`` and
a ``dof`` object with ``variant``, ``values``, ``fixed`` flags and (for
estimated entries) ``bounds``. Floats survive a round-trip bit-identically.

Dataset CSVs hold one observation per row, an optional header, and an
optional final boolean ``outlier`` column marking injected outlier rows.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .params import (
    NU_LOWER_DEFAULT,
    NU_UPPER_DEFAULT,
    Dataset,
    DofSpec,
    ModelParams,
    NuSetting,
    validate_params,
)

PathLike = Union[str, Path]


def dof_to_dict(dof: DofSpec) -> dict:
    out = {
        "variant": dof.variant,
        "values": [s.value for s in dof.nus],
        "fixed": [not s.estimate for s in dof.nus],
    }
    if any(s.estimate for s in dof.nus):
        out["bounds"] = [[s.lower, s.upper] for s in dof.nus]
    return out


def dof_from_dict(d: dict) -> DofSpec:
    values = d.get("values", [])
    fixed = d.get("fixed", [True] * len(values))
    bounds = d.get("bounds", [[NU_LOWER_DEFAULT, NU_UPPER_DEFAULT]] * len(values))
    nus = tuple(
        NuSetting(v, estimate=not f, lower=b[0], upper=b[1])
        for v, f, b in zip(values, fixed, bounds)
    )
    return DofSpec(d["variant"], nus)


def params_to_dict(p: ModelParams) -> dict:
    return {
        "W": [[float(v) for v in row] for row in p.W],
        "mu": [float(v) for v in p.mu],
        "sigma2": p.sigma2,
        "dof": dof_to_dict(p.dof),
    }


def params_from_dict(d: dict) -> ModelParams:
    p = ModelParams(
        W=np.array(d["W"], dtype=float),
        mu=np.array(d["mu"], dtype=float),
        sigma2=float(d["sigma2"]),
        dof=dof_from_dict(d["dof"]),
    )
    validate_params(p)
    return p


def save_params(p: ModelParams, path: PathLike) -> None:
    validate_params(p)
    Path(path).write_text(json.dumps(params_to_dict(p), indent=2) + "\n")


def load_params(path: PathLike) -> ModelParams:
    return params_from_dict(json.loads(Path(path).read_text()))


def save_dataset(ds: Dataset, path: PathLike, header: bool = True) -> None:
    """Write a dataset CSV; the ``outlier`` column is included when a mask exists."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        q = ds.q
        if header:
            cols = [f"x{i + 1}" for i in range(q)]
            if ds.outlier_mask is not None:
                cols.append("outlier")
            writer.writerow(cols)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.X[i]]
            if ds.outlier_mask is not None:
                row.append("true" if ds.outlier_mask[i] else "false")
            writer.writerow(row)


_BOOL_TOKENS = {"true": True, "false": False, "1": True, "0": False}


def load_dataset(path: PathLike, seed: Optional[int] = None) -> Dataset:
    """Read a dataset CSV, detecting header and trailing ``outlier`` column.

    A final column is treated as the outlier mask only when the header names
    it ``outlier`` or when every entry is a literal true/false token; a 0/1
    numeric column without such a header stays part of the data.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty dataset file")

    def _is_float(tok: str) -> bool:
        try:
            float(tok)
            return True
        except ValueError:
            return False

    def _is_data(tok: str) -> bool:
        return _is_float(tok) or tok.strip().lower() in _BOOL_TOKENS

    header = None
    if not all(_is_data(tok) for tok in rows[0]):
        header = [tok.strip().lower() for tok in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header but no data rows")

    last = [r[-1].strip().lower() for r in rows]
    has_mask = False
    if header is not None:
        has_mask = header[-1] == "outlier"
    elif all(tok in ("true", "false") for tok in last):
        has_mask = True

    mask = None
    if has_mask:
        mask = np.array([_BOOL_TOKENS[tok] for tok in last], dtype=bool)
        rows = [r[:-1] for r in rows]
    X = np.array([[float(tok) for tok in r] for r in rows], dtype=float)
    return Dataset(X=X, outlier_mask=mask, seed=seed)
