"""EM estimator for the marginal t model.

The model couples the latent and noise layers through one shared gamma scale
variable, which makes the observation marginally t distributed with scale
matrix WW^T + sigma2 I. Conjugacy gives the E-step in closed form, so the fit
is a plain (deterministic) ECM iteration with an exactly computable
observed-data log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special

from ._scoreeq import solve_nu
from ._start import robust_start
from ._utils import check_matrix
from .distributions import MvtParams, mvt_logpdf
from .params import (
    Dataset,
    DofSpec,
    FitResult,
    ModelParams,
    TraceEntry,
    as_dataset,
    param_change,
)


@dataclass(frozen=True)
class MarginalEStep:
    """Per-observation posterior moments of the shared scale and the latents.

    Attributes
    ----------
    u_mean : ndarray of shape (n,)
        <u_n>, posterior mean of the scale variable.
    u_logmean : ndarray of shape (n,)
        <log u_n>.
    uz : ndarray of shape (n, d)
        <u_n z_n>.
    uzz : ndarray of shape (n, d, d)
        <u_n z_n z_n^T>, symmetric positive semidefinite.
    """

    u_mean: np.ndarray
    u_logmean: np.ndarray
    uz: np.ndarray
    uzz: np.ndarray

    def __post_init__(self):
        if np.any(self.u_mean <= 0):
            raise ValueError("posterior scale means must be positive")


@dataclass(frozen=True, slots=True)
class EmControl:
    """Convergence settings for the deterministic EM loop."""

    tol: float = 1e-6
    max_iter: int = 500

    def __post_init__(self):
        if not (self.tol > 0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


def _require_single(p_or_dof) -> None:
    dof = p_or_dof.dof if isinstance(p_or_dof, ModelParams) else p_or_dof
    if dof.variant != "single":
        raise ValueError("the marginal t model requires a single-dof specification")


def loglik_marginal(p: ModelParams, data) -> float:
    """Exact observed-data log-likelihood: sum of t_nu(mu, WW^T + sigma2 I) terms."""
    _require_single(p)
    data = as_dataset(data)
    C = p.W @ p.W.T + p.sigma2 * np.eye(p.q)
    return float(np.sum(mvt_logpdf(MvtParams(nu=p.dof.nu, mu=p.mu, sigma=C), data.X)))


def estep_marginal(p: ModelParams, data) -> MarginalEStep:
    """Closed-form posterior moments via normal-gamma conjugacy.

    Conditionally on u the observation is N(mu, (WW^T + sigma2 I)/u), so
    u|x ~ Ga((nu+q)/2, (nu+delta)/2) with delta the squared Mahalanobis
    distance under WW^T + sigma2 I; z|x,u is Gaussian with a mean that does
    not depend on u, which gives all mixed moments in closed form.
    """
    _require_single(p)
    data = as_dataset(data)
    X = data.X
    nu, q, d = p.dof.nu, p.q, p.d
    Xc = X - p.mu
    M = p.W.T @ p.W + p.sigma2 * np.eye(d)
    G = Xc @ p.W
    means = np.linalg.solve(M, G.T).T
    # Woodbury: delta = (||x-mu||^2 - (x-mu)' W M^{-1} W' (x-mu)) / sigma2
    delta = (np.einsum("ij,ij->i", Xc, Xc) - np.einsum("ij,ij->i", G, means)) / p.sigma2
    delta = np.maximum(delta, 0.0)
    u_mean = (nu + q) / (nu + delta)
    u_logmean = scipy.special.digamma((nu + q) / 2.0) - np.log((nu + delta) / 2.0)
    uz = u_mean[:, None] * means
    Minv = np.linalg.inv(M)
    uzz = p.sigma2 * Minv + u_mean[:, None, None] * (
        means[:, :, None] * means[:, None, :]
    )
    return MarginalEStep(u_mean=u_mean, u_logmean=u_logmean, uz=uz, uzz=uzz)


def mstep_marginal(e: MarginalEStep, data, current: ModelParams) -> ModelParams:
    """Conditional maximization updates in the order mu, W, sigma2, nu.

    Each update uses the freshest predecessors: mu uses the current W, W uses
    the new mu, sigma2 uses both new values. The dof update solves the score
    equation when the dof is marked estimated, otherwise keeps it fixed.
    """
    data = as_dataset(data)
    X = data.X
    n, q = X.shape
    d = current.d
    u_sum = float(np.sum(e.u_mean))
    mu = (e.u_mean @ X - np.sum(e.uz, axis=0) @ current.W.T) / u_sum
    Xc = X - mu
    A = Xc.T @ e.uz
    B = np.sum(e.uzz, axis=0)
    try:
        W = np.linalg.solve(B.T, A.T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate E-step: singular latent moment sum") from exc
    t1 = float(e.u_mean @ np.einsum("ij,ij->i", Xc, Xc))
    t2 = -2.0 * float(np.sum(e.uz * (Xc @ W)))
    t3 = float(np.sum((W.T @ W) * B))
    sigma2 = max((t1 + t2 + t3) / (n * q), 1e-300)
    dof = current.dof
    setting = dof.nus[0]
    if setting.estimate:
        c = float(np.mean(e.u_logmean - e.u_mean))
        dof = dof.with_values(solve_nu(c, setting.bracket))
    return ModelParams(W=W, mu=mu, sigma2=sigma2, dof=dof)


def fit_marginal_em(
    data, d: int, dof: DofSpec, ctrl: EmControl | None = None, rng=None
) -> FitResult:
    """Fit the marginal t model by ECM from a robust spectral start.

    The iteration is deterministic (``rng`` is accepted for interface
    uniformity and ignored). Convergence is declared when the relative change
    in the observed-data log-likelihood drops below ``ctrl.tol``.
    """
    _require_single(dof)
    data = as_dataset(data)
    if ctrl is None:
        ctrl = EmControl()
    if not (1 <= d < data.q):
        raise ValueError(f"d must satisfy 1 <= d < q={data.q}, got {d}")
    params = robust_start(data, d, dof)
    ll = loglik_marginal(params, data)
    trace = []
    converged = False
    for it in range(1, ctrl.max_iter + 1):
        e = estep_marginal(params, data)
        new_params = mstep_marginal(e, data, params)
        new_ll = loglik_marginal(new_params, data)
        trace.append(
            TraceEntry(
                iteration=it,
                objective=new_ll,
                param_delta=param_change(params, new_params),
            )
        )
        params, prev_ll, ll = new_params, ll, new_ll
        if abs(ll - prev_ll) < ctrl.tol * max(1.0, abs(ll)):
            converged = True
            break
    return FitResult(
        params=params,
        n_iter=len(trace),
        converged=converged,
        trace=tuple(trace),
        seed=data.seed,
    )
