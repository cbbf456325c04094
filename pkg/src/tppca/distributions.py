"""Samplers and densities for the distributions the models are built from.

Gamma distributions use the *rate* convention throughout: Ga(alpha, beta) has
density proportional to ``u**(alpha-1) * exp(-beta*u)`` and mean ``alpha/beta``.
This is the only convention under which the scale variables Ga(nu/2, nu/2)
have mean one, which the scale-mixture construction of the t distribution
requires.

All sampling goes through an explicitly passed ``numpy.random.Generator``;
nothing here touches global random state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.special

from ._utils import check_vector


@dataclass(frozen=True, slots=True)
class GammaParams:
    """Gamma distribution under the rate convention; mean is shape/rate."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and np.isfinite(self.shape)):
            raise ValueError(f"gamma shape must be positive, got {self.shape}")
        if not (self.rate > 0 and np.isfinite(self.rate)):
            raise ValueError(f"gamma rate must be positive, got {self.rate}")

    @property
    def mean(self) -> float:
        return self.shape / self.rate


@dataclass(frozen=True)
class MvtParams:
    """Multivariate t: dof ``nu``, location ``mu``, scale matrix ``sigma``.

    ``nu=np.inf`` selects the Gaussian limit explicitly. The covariance for
    finite nu > 2 is ``nu/(nu-2) * sigma``, not ``sigma`` itself.
    """

    nu: float
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = check_vector(self.mu, "mu")
        sigma = np.asarray(self.sigma, dtype=float)
        if not (self.nu > 0):
            raise ValueError(f"nu must be positive, got {self.nu}")
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(
                f"sigma must be {mu.size}x{mu.size} to match mu, got {sigma.shape}"
            )
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("sigma must be symmetric within 1e-10")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        # fail fast if not positive definite; factor reused by samplers
        object.__setattr__(self, "_chol", _cholesky(sigma))

    @property
    def dim(self) -> int:
        return self.mu.size


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance matrix is not positive definite") from exc


def sample_gamma(g: GammaParams, rng: np.random.Generator, size=None):
    """Draw from Ga(shape, rate); numpy's gamma takes a scale, so invert the rate."""
    return rng.gamma(g.shape, 1.0 / g.rate, size=size)


def sample_mvn(mean, cov, rng: np.random.Generator, size: Optional[int] = None):
    """Multivariate normal draws via the Cholesky factor of ``cov``.

    Returns a (p,) vector, or an (size, p) array when ``size`` is given.
    """
    mean = check_vector(mean, "mean")
    L = _cholesky(np.asarray(cov, dtype=float))
    if size is None:
        return mean + L @ rng.standard_normal(mean.size)
    eps = rng.standard_normal((size, mean.size))
    return mean + eps @ L.T


def sample_mvt(t: MvtParams, rng: np.random.Generator, size: Optional[int] = None):
    """Draw from the multivariate t via its Gaussian scale mixture.

    A scale variable u ~ Ga(nu/2, nu/2) is drawn first, then a normal with
    covariance sigma/u. The Gaussian limit (nu=inf) skips the scale draw and
    matches the plain normal sampler's consumption of the stream.
    """
    L = t._chol
    if size is None:
        if np.isinf(t.nu):
            return t.mu + L @ rng.standard_normal(t.dim)
        u = rng.gamma(t.nu / 2.0, 2.0 / t.nu)
        return t.mu + (L @ rng.standard_normal(t.dim)) / math.sqrt(u)
    if np.isinf(t.nu):
        return t.mu + rng.standard_normal((size, t.dim)) @ L.T
    u = rng.gamma(t.nu / 2.0, 2.0 / t.nu, size=size)
    eps = rng.standard_normal((size, t.dim))
    return t.mu + (eps @ L.T) / np.sqrt(u)[:, None]


def mvt_logpdf(t: MvtParams, x) -> np.ndarray | float:
    """Log density of the multivariate t at ``x`` ((p,) or (n, p)).

    Evaluated with log-gamma terms throughout; the Gaussian limit uses the
    exact normal log density.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != t.dim:
        raise ValueError(f"x has dimension {X.shape[1]}, expected {t.dim}")
    L = t._chol
    half_logdet = float(np.sum(np.log(np.diag(L))))
    sol = scipy.linalg.solve_triangular(L, (X - t.mu).T, lower=True)
    maha = np.sum(sol**2, axis=0)
    p = t.dim
    if np.isinf(t.nu):
        out = -0.5 * (p * math.log(2.0 * math.pi) + maha) - half_logdet
    else:
        out = (
            scipy.special.gammaln((t.nu + p) / 2.0)
            - scipy.special.gammaln(t.nu / 2.0)
            - 0.5 * p * math.log(t.nu * math.pi)
            - half_logdet
            - 0.5 * (t.nu + p) * np.log1p(maha / t.nu)
        )
    return float(out[0]) if single else out


def gamma_posterior(prior: GammaParams, q: int, mahalanobis: float) -> GammaParams:
    """Conjugate update of a gamma scale prior by a q-dimensional normal likelihood.

    Observing x with x|u ~ N(mu, Sigma/u) and squared Mahalanobis distance
    ``mahalanobis`` updates Ga(a, b) to Ga(a + q/2, b + mahalanobis/2).
    """
    if q < 0:
        raise ValueError(f"dimension count must be nonnegative, got {q}")
    if mahalanobis < 0:
        raise ValueError(f"mahalanobis distance must be nonnegative, got {mahalanobis}")
    return GammaParams(prior.shape + q / 2.0, prior.rate + mahalanobis / 2.0)


def digamma(x):
    """Digamma for positive arguments; rejects the nonpositive domain."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("digamma requires positive arguments")
    out = scipy.special.digamma(x)
    return float(out) if out.ndim == 0 else out
