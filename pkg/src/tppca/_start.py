"""Robust starting values shared by the iterative estimators.

Contaminated data wrecks mean-based starts, so initialization centers with
the coordinatewise median and takes classical PCA of the median-centered
second-moment matrix. Degrees of freedom start from their configured initial
values.
"""

from __future__ import annotations

import numpy as np

from .params import Dataset, DofSpec, ModelParams

_EIG_FLOOR = 1e-12


def sorted_eigh(S: np.ndarray):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def spectral_ppca_params(evals, evecs, d: int):
    """Map a covariance spectrum to (W, sigma2) the way the closed form does.

    sigma2 is the mean of the q-d trailing eigenvalues; W scales the leading
    eigenvectors by sqrt(eigenvalue - sigma2), floored at zero for safety.
    """
    q = evals.size
    if not (1 <= d < q):
        raise ValueError(f"d must satisfy 1 <= d < q={q}, got {d}")
    sigma2 = float(np.mean(evals[d:]))
    sigma2 = max(sigma2, _EIG_FLOOR)
    gaps = np.maximum(evals[:d] - sigma2, _EIG_FLOOR)
    W = evecs[:, :d] * np.sqrt(gaps)
    return W, sigma2


def robust_start(data: Dataset, d: int, dof: DofSpec) -> ModelParams:
    """Median-centered spectral start for the iterative fits."""
    X = data.X
    mu = np.median(X, axis=0)
    Xc = X - mu
    S = (Xc.T @ Xc) / X.shape[0]
    evals, evecs = sorted_eigh(S)
    W, sigma2 = spectral_ppca_params(evals, evecs, d)
    return ModelParams(W=W, mu=mu, sigma2=sigma2, dof=dof)
