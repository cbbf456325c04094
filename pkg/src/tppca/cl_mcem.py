"""Monte Carlo EM for the two-scale hierarchical t model.

The model places independent gamma scale variables on the data layer (u1) and
the latent layer (u2), so no closed-form E-step exists. Each E-step runs a
per-observation Gibbs chain over (u1, u2, z), Monte Carlo averages of the
retained draws replace the posterior moments, and the M-step is the same
conditional-maximization cascade as in the deterministic EM. The conditional
model (Gaussian latent layer) reuses the machinery with u2 pinned at 1.

All chains for a dataset are advanced together as one vectorized sweep; the
draw order within a sweep is fixed (u1 block, u2 block, z block) so a fit is
a deterministic function of (data, settings, seed).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.special

from ._scoreeq import solve_nu
from ._utils import as_generator, check_vector
from .distributions import GammaParams
from .params import (
    NU_LOWER_DEFAULT,
    NU_UPPER_DEFAULT,
    Dataset,
    DofSpec,
    FitResult,
    ModelParams,
    TraceEntry,
    as_dataset,
    param_change,
    validate_params,
)
from .standard import latent_linear_means


@dataclass(frozen=True, slots=True)
class McemControl:
    """Settings for the Monte Carlo EM loop.

    ``B`` is the number of retained draws at the first EM iteration; the
    retained count grows by ``b_growth`` per iteration up to ``b_max`` so that
    Monte Carlo precision increases as the parameters settle. The first
    E-step burns in ``burn_in_first`` sweeps from the cold start; later
    E-steps warm-start from the previous chain state and burn ``burn_in``.
    Convergence is declared when the relative parameter change, averaged over
    the last ``window`` iterations, drops below ``param_tol``.
    """

    B: int = 100
    burn_in: int = 5
    max_iter: int = 100
    param_tol: float = 1e-4
    window: int = 5
    nu_bracket: tuple = (NU_LOWER_DEFAULT, NU_UPPER_DEFAULT)
    burn_in_first: int = 20
    b_growth: int = 20
    b_max: int = 1000

    def __post_init__(self):
        if self.B < 1:
            raise ValueError(f"B must be at least 1, got {self.B}")
        if self.burn_in < 0 or self.burn_in_first < 0:
            raise ValueError("burn-in counts must be nonnegative")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not (self.param_tol > 0):
            raise ValueError(f"param_tol must be positive, got {self.param_tol}")
        if self.window < 1:
            raise ValueError(f"window must be at least 1, got {self.window}")
        if self.b_growth < 0 or self.b_max < self.B:
            raise ValueError("retained-draw schedule is inconsistent")
        lo, hi = self.nu_bracket
        if not (0 < lo < hi):
            raise ValueError(f"invalid nu bracket {self.nu_bracket}")

    def retained_at(self, iteration: int) -> int:
        """Retained draws for EM iteration ``iteration`` (1-based)."""
        return min(self.B + self.b_growth * (iteration - 1), self.b_max)


class GibbsChainState:
    """Current draws and retained history for all per-observation chains.

    One instance holds the chains of every observation: ``u1`` and ``u2`` are
    (n,) vectors of the current scale draws, ``z`` the (n, d) matrix of
    current latents. ``reset_history(capacity)`` clears the retained buffer;
    ``record()`` appends the current draws to it.
    """

    def __init__(self, u1, u2, z):
        self.u1 = np.asarray(u1, dtype=float)
        self.u2 = np.asarray(u2, dtype=float)
        self.z = np.asarray(z, dtype=float)
        n = self.z.shape[0]
        if self.u1.shape != (n,) or self.u2.shape != (n,):
            raise ValueError("scale vectors must have one entry per observation")
        if np.any(self.u1 <= 0) or np.any(self.u2 <= 0):
            raise ValueError("scale draws must be positive")
        self._hist_u1: Optional[np.ndarray] = None
        self._hist_u2: Optional[np.ndarray] = None
        self._hist_z: Optional[np.ndarray] = None
        self.n_retained = 0

    @classmethod
    def initial(cls, p: ModelParams, X: np.ndarray) -> "GibbsChainState":
        """Cold start: unit scales, latents at their linear posterior means."""
        n = X.shape[0]
        return cls(np.ones(n), np.ones(n), latent_linear_means(p, X))

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def reset_history(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"history capacity must be positive, got {capacity}")
        self._hist_u1 = np.empty((capacity, self.n))
        self._hist_u2 = np.empty((capacity, self.n))
        self._hist_z = np.empty((capacity, self.n, self.d))
        self.n_retained = 0

    def record(self) -> None:
        """Append the current draws to the retained history."""
        if self._hist_u1 is None:
            raise ValueError("no history buffer; call reset_history first")
        if self.n_retained >= self._hist_u1.shape[0]:
            raise ValueError("history buffer is full")
        b = self.n_retained
        self._hist_u1[b] = self.u1
        self._hist_u2[b] = self.u2
        self._hist_z[b] = self.z
        self.n_retained = b + 1

    def retained(self, b: int):
        """Views of the last ``b`` retained draws: (u1, u2, z) arrays."""
        if self._hist_u1 is None or self.n_retained < b:
            raise ValueError(
                f"need {b} retained draws, have {self.n_retained}"
            )
        lo = self.n_retained - b
        hi = self.n_retained
        return (
            self._hist_u1[lo:hi],
            self._hist_u2[lo:hi],
            self._hist_z[lo:hi],
        )


@dataclass(frozen=True)
class CLExpectationSet:
    """Monte Carlo posterior moments per observation.

    ``u1z`` and ``u1zz`` are the data-layer-weighted latent moments that the
    M-step consumes; ``u2zsq`` = <u2 z'z> is kept in addition so the expected
    complete log-likelihood can be evaluated in full.
    """

    u1_mean: np.ndarray
    u2_mean: np.ndarray
    u1_logmean: np.ndarray
    u2_logmean: np.ndarray
    u1z: np.ndarray
    u1zz: np.ndarray
    u2zsq: np.ndarray

    def __post_init__(self):
        if np.any(self.u1_mean <= 0) or np.any(self.u2_mean <= 0):
            raise ValueError("scale moment estimates must be positive")


# ----------------------------------------------------------------------------
# Full conditionals


def u1_conditional(p: ModelParams, x, z) -> GammaParams:
    """Data-layer scale conditional: Ga((nu1+q)/2, (nu1 + ||x-Wz-mu||^2/sigma2)/2)."""
    nu1 = _data_layer_nu(p.dof)
    x = check_vector(x, "x")
    z = check_vector(z, "z")
    r = float(np.sum((x - p.W @ z - p.mu) ** 2))
    return GammaParams((nu1 + p.q) / 2.0, (nu1 + r / p.sigma2) / 2.0)


def u2_conditional(p: ModelParams, z) -> GammaParams:
    """Latent-layer scale conditional: Ga((nu2+d)/2, (nu2 + ||z||^2)/2)."""
    if p.dof.variant != "pair":
        raise ValueError("the latent scale exists only in the pair-dof model")
    z = check_vector(z, "z")
    nu2 = p.dof.nu_pair[1]
    return GammaParams((nu2 + p.d) / 2.0, (nu2 + float(z @ z)) / 2.0)


def z_conditional(p: ModelParams, x, u1: float, u2: float):
    """Latent conditional N(M^{-1} W'(x-mu), (sigma2/u1) M^{-1}).

    M = W'W + (sigma2 u2 / u1) I; the conditional model is the u2 = 1 case.
    """
    x = check_vector(x, "x")
    if u1 <= 0 or u2 <= 0:
        raise ValueError("scale values must be positive")
    M = p.W.T @ p.W + (p.sigma2 * u2 / u1) * np.eye(p.d)
    mean = np.linalg.solve(M, p.W.T @ (x - p.mu))
    cov = (p.sigma2 / u1) * np.linalg.inv(M)
    return mean, cov


def _data_layer_nu(dof: DofSpec) -> float:
    if dof.variant == "pair":
        return dof.nu_pair[0]
    if dof.variant == "single":
        return dof.nu
    raise ValueError("the data-layer scale exists only in t-dof models")


# ----------------------------------------------------------------------------
# Vectorized sweep


class _SweepWorkspace:
    """Per-(params, data) quantities reused across Gibbs sweeps.

    The z conditional covariance shares the eigenvectors of W'W across
    observations: M_n = V diag(lam + c_n) V' with c_n = sigma2 u2_n / u1_n,
    so one d x d eigendecomposition serves every chain.
    """

    def __init__(self, p: ModelParams, X: np.ndarray):
        self.q = p.q
        self.d = p.d
        self.sigma2 = p.sigma2
        self.dof = p.dof
        Xc = X - p.mu
        self.xc_sq = np.einsum("ij,ij->i", Xc, Xc)
        lam, V = np.linalg.eigh(p.W.T @ p.W)
        self.lam = np.maximum(lam, 0.0)
        self.V = V
        self.XcWV = (Xc @ p.W) @ V

    def residual_sq(self, z: np.ndarray) -> np.ndarray:
        """||x - Wz - mu||^2 per observation, via the cached spectrum."""
        zv = z @ self.V
        r = self.xc_sq - 2.0 * np.einsum("ij,ij->i", zv, self.XcWV)
        r += np.einsum("ij,j,ij->i", zv, self.lam, zv)
        return np.maximum(r, 0.0)

    def sweep(
        self,
        state: GibbsChainState,
        rng: np.random.Generator,
        sample_u1: bool = True,
        sample_u2: bool = True,
    ) -> None:
        """One full cycle u1 -> u2 -> z, each block using the freshest values."""
        if sample_u1:
            nu1 = _data_layer_nu(self.dof)
            r = self.residual_sq(state.z)
            rate = (nu1 + r / self.sigma2) / 2.0
            state.u1 = rng.gamma((nu1 + self.q) / 2.0, 1.0 / rate)
        if sample_u2:
            nu2 = self.dof.nu_pair[1]
            rate = (nu2 + np.einsum("ij,ij->i", state.z, state.z)) / 2.0
            state.u2 = rng.gamma((nu2 + self.d) / 2.0, 1.0 / rate)
        c = self.sigma2 * state.u2 / state.u1
        denom = self.lam[None, :] + c[:, None]
        scale = np.sqrt(self.sigma2 / state.u1)
        eps = rng.standard_normal((state.n, self.d))
        coef = self.XcWV / denom + eps * (scale[:, None] / np.sqrt(denom))
        state.z = coef @ self.V.T


def gibbs_sweep(p: ModelParams, x, state: GibbsChainState, rng=None) -> GibbsChainState:
    """Advance every chain by one full Gibbs cycle; mutates and returns ``state``.

    ``x`` is the (n, q) observation matrix aligned with the chains (a single
    q-vector is accepted when the state holds one chain).
    """
    if p.dof.variant != "pair":
        raise ValueError("gibbs_sweep requires a pair-dof model")
    validate_params(p)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape != (state.n, p.q):
        raise ValueError(
            f"observations {X.shape} do not match chains ({state.n}, {p.q})"
        )
    ws = _SweepWorkspace(p, X)
    ws.sweep(state, as_generator(rng))
    return state


# ----------------------------------------------------------------------------
# Monte Carlo expectations and M-step


def mc_expectations(state: GibbsChainState, ctrl: McemControl) -> CLExpectationSet:
    """Empirical posterior moments over the last ``ctrl.B`` retained draws."""
    H1, H2, Hz = state.retained(ctrl.B)
    b = ctrl.B
    u1_mean = H1.mean(axis=0)
    u2_mean = H2.mean(axis=0)
    u1_logmean = np.log(H1).mean(axis=0)
    u2_logmean = np.log(H2).mean(axis=0)
    u1z = np.einsum("bn,bnj->nj", H1, Hz) / b
    u1zz = np.einsum("bn,bni,bnj->nij", H1, Hz, Hz) / b
    u1zz = 0.5 * (u1zz + np.swapaxes(u1zz, 1, 2))
    u2zsq = np.einsum("bn,bnj,bnj->n", H2, Hz, Hz) / b
    return CLExpectationSet(
        u1_mean=u1_mean,
        u2_mean=u2_mean,
        u1_logmean=u1_logmean,
        u2_logmean=u2_logmean,
        u1z=u1z,
        u1zz=u1zz,
        u2zsq=u2zsq,
    )


def _core_updates(e: CLExpectationSet, X: np.ndarray, current: ModelParams):
    """Conditional maximization of (mu, W, sigma2) given the moment set."""
    n, q = X.shape
    u_sum = float(np.sum(e.u1_mean))
    mu = (e.u1_mean @ X - np.sum(e.u1z, axis=0) @ current.W.T) / u_sum
    Xc = X - mu
    A = Xc.T @ e.u1z
    B = np.sum(e.u1zz, axis=0)
    try:
        W = np.linalg.solve(B.T, A.T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate E-step: singular latent moment sum") from exc
    t1 = float(e.u1_mean @ np.einsum("ij,ij->i", Xc, Xc))
    t2 = -2.0 * float(np.sum(e.u1z * (Xc @ W)))
    t3 = float(np.sum((W.T @ W) * B))
    sigma2 = max((t1 + t2 + t3) / (n * q), 1e-300)
    return mu, W, sigma2


def mstep_cl(e: CLExpectationSet, data, current: ModelParams) -> ModelParams:
    """Parameter updates for the pair-dof model, in the order mu, W, sigma2, nus.

    Each dof marked estimated is replaced by the root of its score equation
    (bisection on the configured bracket; clamped with a warning when the
    score has no sign change there).
    """
    if current.dof.variant != "pair":
        raise ValueError("mstep_cl requires a pair-dof model")
    data = as_dataset(data)
    mu, W, sigma2 = _core_updates(e, data.X, current)
    s1, s2 = current.dof.nus
    new1, new2 = s1.value, s2.value
    if s1.estimate:
        new1 = solve_nu(float(np.mean(e.u1_logmean - e.u1_mean)), s1.bracket)
    if s2.estimate:
        new2 = solve_nu(float(np.mean(e.u2_logmean - e.u2_mean)), s2.bracket)
    dof = current.dof.with_values(new1, new2)
    return ModelParams(W=W, mu=mu, sigma2=sigma2, dof=dof)


def _gamma_layer_terms(nu: float, u_mean, u_logmean) -> float:
    n = u_mean.size
    half = nu / 2.0
    return float(
        n * (half * math.log(half) - scipy.special.gammaln(half))
        + (half - 1.0) * np.sum(u_logmean)
        - half * np.sum(u_mean)
    )


def expected_complete_loglik(e: CLExpectationSet, data, p: ModelParams) -> float:
    """Expected complete-data log-likelihood under the moment set.

    Additive 2*pi constants, which depend on neither the parameters nor the
    moments, are dropped. This is the Monte Carlo EM surrogate objective: it
    should trend upward over iterations, though Monte Carlo noise breaks
    strict per-step monotonicity.
    """
    data = as_dataset(data)
    X = data.X
    n, q = X.shape
    d = p.d
    Xc = X - p.mu
    s = float(e.u1_mean @ np.einsum("ij,ij->i", Xc, Xc))
    s -= 2.0 * float(np.sum(e.u1z * (Xc @ p.W)))
    s += float(np.sum((p.W.T @ p.W) * np.sum(e.u1zz, axis=0)))
    total = (
        0.5 * q * float(np.sum(e.u1_logmean))
        - 0.5 * n * q * math.log(p.sigma2)
        - s / (2.0 * p.sigma2)
    )
    total += 0.5 * d * float(np.sum(e.u2_logmean)) - 0.5 * float(np.sum(e.u2zsq))
    if p.dof.variant == "pair":
        nu1, nu2 = p.dof.nu_pair
        total += _gamma_layer_terms(nu1, e.u1_mean, e.u1_logmean)
        total += _gamma_layer_terms(nu2, e.u2_mean, e.u2_logmean)
    elif p.dof.variant == "single":
        total += _gamma_layer_terms(p.dof.nu, e.u1_mean, e.u1_logmean)
    return total


# ----------------------------------------------------------------------------
# Fitting loops


def _mcem_start(data: Dataset, d: int, dof: DofSpec) -> ModelParams:
    """Starting parameters for the Monte Carlo EM loop.

    The Gibbs chains can get trapped when the spectral start points at an
    outlier direction (a handful of extreme collinear points dominates the
    raw second-moment matrix), so the loop starts from the deterministic
    fit of the closest tractable model instead: the shared-scale EM solution
    for t dofs, the closed-form Gaussian fit for a Gaussian dof. Only
    (W, mu, sigma2) are inherited; the dof values stay at their configured
    initial values.
    """
    from .marginal_t import EmControl, fit_marginal_em
    from .standard import fit_standard

    if dof.is_gaussian:
        warm = fit_standard(data, d).params
    else:
        setting = dof.nus[0]
        marg_dof = DofSpec(variant="single", nus=(setting,))
        warm = fit_marginal_em(
            data, d, marg_dof, EmControl(tol=1e-5, max_iter=200)
        ).params
    return ModelParams(W=warm.W, mu=warm.mu, sigma2=warm.sigma2, dof=dof)


def _fit_mcem(
    data,
    d: int,
    dof: DofSpec,
    ctrl: Optional[McemControl],
    rng,
    sample_u2: bool,
) -> FitResult:
    data = as_dataset(data)
    if ctrl is None:
        ctrl = McemControl()
    if not (1 <= d < data.q):
        raise ValueError(f"d must satisfy 1 <= d < q={data.q}, got {d}")
    rng = as_generator(rng)
    X = data.X
    params = _mcem_start(data, d, dof)
    state = GibbsChainState.initial(params, X)
    sample_u1 = not dof.is_gaussian
    trace = []
    deltas = []
    converged = False
    for it in range(1, ctrl.max_iter + 1):
        ws = _SweepWorkspace(params, X)
        n_burn = ctrl.burn_in_first if it == 1 else ctrl.burn_in
        for _ in range(n_burn):
            ws.sweep(state, rng, sample_u1, sample_u2)
        b = ctrl.retained_at(it)
        state.reset_history(b)
        for _ in range(b):
            ws.sweep(state, rng, sample_u1, sample_u2)
            state.record()
        e = mc_expectations(state, dataclasses.replace(ctrl, B=b))
        new_params = _mstep_dispatch(e, data, params)
        objective = expected_complete_loglik(e, data, new_params)
        delta = param_change(params, new_params)
        trace.append(TraceEntry(iteration=it, objective=objective, param_delta=delta))
        deltas.append(delta)
        params = new_params
        if it >= ctrl.window and float(np.mean(deltas[-ctrl.window :])) < ctrl.param_tol:
            converged = True
            break
    return FitResult(
        params=params,
        n_iter=len(trace),
        converged=converged,
        trace=tuple(trace),
        seed=data.seed,
    )


def _mstep_dispatch(
    e: CLExpectationSet, data: Dataset, current: ModelParams
) -> ModelParams:
    if current.dof.variant == "pair":
        return mstep_cl(e, data, current)
    mu, W, sigma2 = _core_updates(e, data.X, current)
    dof = current.dof
    if dof.variant == "single" and dof.nus[0].estimate:
        c = float(np.mean(e.u1_logmean - e.u1_mean))
        dof = dof.with_values(solve_nu(c, dof.nus[0].bracket))
    return ModelParams(W=W, mu=mu, sigma2=sigma2, dof=dof)


def fit_cl_mcem(
    data, d: int, dof: DofSpec, ctrl: Optional[McemControl] = None, rng=None
) -> FitResult:
    """Fit the two-scale model by Monte Carlo EM with warm-started Gibbs chains."""
    if dof.variant != "pair":
        raise ValueError("fit_cl_mcem requires a pair-dof specification")
    return _fit_mcem(data, d, dof, ctrl, rng, sample_u2=True)


def fit_conditional_t(
    data, d: int, dof: DofSpec, ctrl: Optional[McemControl] = None, rng=None
) -> FitResult:
    """Fit the conditional model: the same MCEM with the latent scale pinned at 1.

    A Gaussian dof additionally pins the data-layer scale, which reduces the
    procedure to a Monte Carlo variant of Gaussian EM (useful as a limit
    check; the closed-form fit is preferable in that case).
    """
    if dof.variant not in ("single", "gaussian"):
        raise ValueError("fit_conditional_t requires a single-dof or Gaussian model")
    return _fit_mcem(data, d, dof, ctrl, rng, sample_u2=False)


def mc_latent_means(
    p: ModelParams,
    X,
    rng=None,
    n_draws: int = 500,
    burn_in: int = 50,
) -> np.ndarray:
    """Gibbs estimate of the latent posterior means E(z|x) under ``p``.

    Used for the models whose posterior mean is not available in closed form;
    the chain variant (full or latent-scale-pinned) follows the dof spec.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rng = as_generator(rng)
    state = GibbsChainState.initial(p, X)
    ws = _SweepWorkspace(p, X)
    sample_u1 = not p.dof.is_gaussian
    sample_u2 = p.dof.variant == "pair"
    for _ in range(burn_in):
        ws.sweep(state, rng, sample_u1, sample_u2)
    total = np.zeros_like(state.z)
    for _ in range(n_draws):
        ws.sweep(state, rng, sample_u1, sample_u2)
        total += state.z
    return total / n_draws
