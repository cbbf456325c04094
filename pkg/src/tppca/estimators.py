"""Scikit-learn style wrappers around the fitting routines.

Each estimator follows the usual conventions: constructor arguments are
stored verbatim, ``fit`` computes attributes with trailing underscores and
returns ``self``, ``transform`` maps observations to latent posterior means.
The fitted loading matrix ``W_`` is only identified up to rotation; use
``subspace_`` (an orthonormal basis of its span) for comparisons.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._utils import as_generator
from .cl_mcem import McemControl, fit_cl_mcem, fit_conditional_t, mc_latent_means
from .marginal_t import EmControl, fit_marginal_em
from .metrics import orthonormalize
from .params import NU_LOWER_DEFAULT, NU_UPPER_DEFAULT, Dataset, DofSpec, ModelParams
from .standard import fit_standard, latent_linear_means


class _PPCABase(TransformerMixin, BaseEstimator):
    """Shared plumbing: input checks, fitted-attribute bookkeeping, transform."""

    def _validate_X(self, X, *, reset: bool):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2 if reset else 1)
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but the estimator was fitted "
                f"with {self.n_features_in_}"
            )
        return X

    def _store_fit(self, result) -> None:
        p = result.params
        self.W_ = p.W
        self.mu_ = p.mu
        self.sigma2_ = p.sigma2
        self.subspace_ = orthonormalize(p.W).basis
        self.fit_result_ = result
        self.n_iter_ = result.n_iter

    def _params(self) -> ModelParams:
        return self.fit_result_.params

    def transform(self, X):
        """Latent posterior means E(z|x), one row per observation."""
        check_is_fitted(self, "fit_result_")
        X = self._validate_X(X, reset=False)
        return self._posterior_means(X)

    def _posterior_means(self, X):
        return latent_linear_means(self._params(), X)


class StandardPPCA(_PPCABase):
    """Classical probabilistic PCA, fitted in closed form.

    Parameters
    ----------
    n_components : int, default=1
        Latent dimension d; must be smaller than the number of features.

    Attributes
    ----------
    W_ : ndarray of shape (n_features, n_components)
    mu_ : ndarray of shape (n_features,)
    sigma2_ : float
    subspace_ : ndarray of shape (n_features, n_components)
        Orthonormal basis of the fitted principal subspace.
    """

    def __init__(self, n_components=1):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = self._validate_X(X, reset=True)
        self._store_fit(fit_standard(X, self.n_components))
        return self


class MarginalTPPCA(_PPCABase):
    """Robust PPCA with one shared heavy-tail scale, fitted by EM.

    Parameters
    ----------
    n_components : int, default=1
    nu : float, default=5.0
        Degrees of freedom: the starting value when estimated, the value
        itself when ``fix_nu`` is set.
    fix_nu : bool, default=False
    nu_bounds : pair of floats, default=(0.05, 500.0)
        Search bracket for the dof score equation.
    tol : float, default=1e-6
        Relative log-likelihood change declaring convergence.
    max_iter : int, default=500
    """

    def __init__(
        self,
        n_components=1,
        nu=5.0,
        fix_nu=False,
        nu_bounds=(NU_LOWER_DEFAULT, NU_UPPER_DEFAULT),
        tol=1e-6,
        max_iter=500,
    ):
        self.n_components = n_components
        self.nu = nu
        self.fix_nu = fix_nu
        self.nu_bounds = nu_bounds
        self.tol = tol
        self.max_iter = max_iter

    def _dof(self) -> DofSpec:
        if self.fix_nu:
            return DofSpec.single(self.nu)
        lo, hi = self.nu_bounds
        return DofSpec.single_estimated(self.nu, lo, hi)

    def fit(self, X, y=None):
        X = self._validate_X(X, reset=True)
        result = fit_marginal_em(
            X,
            self.n_components,
            self._dof(),
            EmControl(tol=self.tol, max_iter=self.max_iter),
        )
        self._store_fit(result)
        self.nu_ = result.params.dof.nu
        return self


class _McemBase(_PPCABase):
    """Shared fit plumbing for the Gibbs-based estimators."""

    def _ctrl(self) -> McemControl:
        lo, hi = self.nu_bounds
        return McemControl(max_iter=self.max_iter, nu_bracket=(lo, hi))

    def _fit_mcem(self, X, fit_fn, dof):
        rng = as_generator(self.random_state)
        # transform() draws fresh chains; derive its seed up front so both
        # fit and transform are reproducible functions of random_state.
        self._transform_seed_ = int(rng.integers(2**63))
        data = Dataset(X=X)
        result = fit_fn(data, self.n_components, dof, self._ctrl(), rng)
        self._store_fit(result)
        return result

    def _posterior_means(self, X):
        return mc_latent_means(
            self._params(), X, np.random.default_rng(self._transform_seed_)
        )


class ConditionalTPPCA(_McemBase):
    """Robust PPCA with a heavy-tailed data layer and Gaussian latents.

    The latent posterior is not available in closed form, so both fitting and
    ``transform`` run per-observation Gibbs chains (Monte Carlo EM).

    Parameters
    ----------
    n_components : int, default=1
    nu : float, default=5.0
        Data-layer degrees of freedom (starting value unless ``fix_nu``).
    fix_nu : bool, default=False
    nu_bounds : pair of floats, default=(0.05, 500.0)
    max_iter : int, default=100
        Monte Carlo EM iterations.
    random_state : int, Generator or None, default=None
    """

    def __init__(
        self,
        n_components=1,
        nu=5.0,
        fix_nu=False,
        nu_bounds=(NU_LOWER_DEFAULT, NU_UPPER_DEFAULT),
        max_iter=100,
        random_state=None,
    ):
        self.n_components = n_components
        self.nu = nu
        self.fix_nu = fix_nu
        self.nu_bounds = nu_bounds
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate_X(X, reset=True)
        if self.fix_nu:
            dof = DofSpec.single(self.nu)
        else:
            lo, hi = self.nu_bounds
            dof = DofSpec.single_estimated(self.nu, lo, hi)
        result = self._fit_mcem(X, fit_conditional_t, dof)
        self.nu_ = result.params.dof.nu
        return self


class CLTPPCA(_McemBase):
    """Robust PPCA with independent heavy-tail scales on both layers.

    Parameters
    ----------
    n_components : int, default=1
    nu1, nu2 : float, default=5.0
        Data-layer and latent-layer degrees of freedom (starting values
        unless ``fix_nu``).
    fix_nu : bool, default=False
        Fix both dofs instead of estimating them.
    nu_bounds : pair of floats, default=(0.05, 500.0)
    max_iter : int, default=100
        Monte Carlo EM iterations.
    random_state : int, Generator or None, default=None
    """

    def __init__(
        self,
        n_components=1,
        nu1=5.0,
        nu2=5.0,
        fix_nu=False,
        nu_bounds=(NU_LOWER_DEFAULT, NU_UPPER_DEFAULT),
        max_iter=100,
        random_state=None,
    ):
        self.n_components = n_components
        self.nu1 = nu1
        self.nu2 = nu2
        self.fix_nu = fix_nu
        self.nu_bounds = nu_bounds
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate_X(X, reset=True)
        if self.fix_nu:
            dof = DofSpec.pair(self.nu1, self.nu2)
        else:
            lo, hi = self.nu_bounds
            dof = DofSpec.pair_estimated(self.nu1, self.nu2, lo, hi)
        result = self._fit_mcem(X, fit_cl_mcem, dof)
        self.nu_ = result.params.dof.nu_pair
        return self
