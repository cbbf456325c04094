"""Classical Gaussian probabilistic PCA via its closed-form maximum likelihood fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._start import sorted_eigh, spectral_ppca_params
from ._utils import check_matrix, check_vector
from .distributions import MvtParams, mvt_logpdf
from .params import Dataset, DofSpec, FitResult, ModelParams, TraceEntry, as_dataset


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectrum of a symmetric matrix with eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        vals = check_vector(self.eigenvalues, "eigenvalues")
        vecs = check_matrix(self.eigenvectors, "eigenvectors")
        q = vals.size
        if vecs.shape != (q, q):
            raise ValueError(f"eigenvectors must be {q}x{q}, got {vecs.shape}")
        if np.any(np.diff(vals) > 0):
            raise ValueError("eigenvalues must be sorted descending")
        if not np.allclose(vecs.T @ vecs, np.eye(q), atol=1e-8):
            raise ValueError("eigenvector columns must be orthonormal within 1e-8")
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)

    @classmethod
    def of_covariance(cls, S) -> "EigenDecomposition":
        vals, vecs = sorted_eigh(np.asarray(S, dtype=float))
        return cls(vals, vecs)


def gaussian_loglik(p: ModelParams, X: np.ndarray) -> float:
    """Observed-data log-likelihood under the Gaussian model N(mu, WW^T + sigma2 I)."""
    C = p.W @ p.W.T + p.sigma2 * np.eye(p.q)
    t = MvtParams(nu=np.inf, mu=p.mu, sigma=C)
    return float(np.sum(mvt_logpdf(t, X)))


def fit_standard(data, d: int) -> FitResult:
    """Closed-form probabilistic PCA fit.

    mu is the sample mean, sigma2 the mean of the q-d smallest eigenvalues of
    the sample covariance, and W the leading eigenvectors scaled by
    sqrt(eigenvalue - sigma2); the rotational indeterminacy is resolved by
    taking the rotation to be the identity.
    """
    data = as_dataset(data)
    X = data.X
    n, q = X.shape
    if not (1 <= d < q):
        raise ValueError(f"d must satisfy 1 <= d < q={q}, got {d}")
    mu = X.mean(axis=0)
    Xc = X - mu
    S = (Xc.T @ Xc) / n
    eig = EigenDecomposition.of_covariance(S)
    W, sigma2 = spectral_ppca_params(eig.eigenvalues, eig.eigenvectors, d)
    params = ModelParams(W=W, mu=mu, sigma2=sigma2, dof=DofSpec.gaussian())
    objective = gaussian_loglik(params, X)
    return FitResult(
        params=params,
        n_iter=1,
        converged=True,
        trace=(TraceEntry(iteration=1, objective=objective, param_delta=0.0),),
        seed=data.seed,
    )


def latent_linear_means(p: ModelParams, X) -> np.ndarray:
    """Posterior means M^{-1} W^T (x - mu), M = W^T W + sigma2 I, for rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M = p.W.T @ p.W + p.sigma2 * np.eye(p.d)
    return np.linalg.solve(M, p.W.T @ (X - p.mu).T).T


def posterior_mean_z(p: ModelParams, x) -> np.ndarray:
    """Latent posterior mean under the Gaussian model.

    As sigma2 -> 0 with orthonormal W columns this tends to the orthogonal
    projection W^T (x - mu), i.e. conventional PCA scores.
    """
    if not p.dof.is_gaussian:
        raise ValueError("posterior_mean_z requires a Gaussian-dof model")
    x = check_vector(x, "x")
    if x.size != p.q:
        raise ValueError(f"x has dimension {x.size}, expected {p.q}")
    return latent_linear_means(p, x[None, :])[0]
