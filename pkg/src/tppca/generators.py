"""Generative samplers for the three hierarchical models and the experiment data.

Each model sampler returns the *full* latent state (x, z, u1, u2), not just the
observations, so tests can check the hierarchical structure directly. The
samplers are vectorized: each latent block is drawn as one array, in a fixed
documented order, so a given (params, n, seed) triple always yields the same
samples regardless of how the result is consumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np

from ._utils import as_generator
from .params import Dataset, ModelParams


@dataclass(frozen=True, slots=True)
class OutlierSpec:
    """Outlier contamination: `count` points i.i.d. uniform on [-h, h]^q."""

    count: int
    box_halfwidth: float

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"outlier count must be nonnegative, got {self.count}")
        if not (self.box_halfwidth > 0):
            raise ValueError(
                f"box halfwidth must be positive, got {self.box_halfwidth}"
            )


class GeneratedSample(NamedTuple):
    """Full latent state of one draw from a hierarchical model."""

    x: np.ndarray
    z: np.ndarray
    u1: float
    u2: float


class GeneratedSamples:
    """Batch of generated samples; behaves as a sequence of GeneratedSample.

    Attributes
    ----------
    x : ndarray of shape (n, q)
    z : ndarray of shape (n, d)
    u1 : ndarray of shape (n,)
        Data-layer scale variables (all ones under a Gaussian data layer).
    u2 : ndarray of shape (n,)
        Latent-layer scale variables (all ones for the conditional model,
        equal to u1 for the marginal model).
    """

    def __init__(self, x, z, u1, u2):
        self.x = np.asarray(x, dtype=float)
        self.z = np.asarray(z, dtype=float)
        self.u1 = np.asarray(u1, dtype=float)
        self.u2 = np.asarray(u2, dtype=float)
        n = self.x.shape[0]
        if not (self.z.shape[0] == self.u1.shape[0] == self.u2.shape[0] == n):
            raise ValueError("sample blocks disagree on the number of draws")
        if np.any(self.u1 <= 0) or np.any(self.u2 <= 0):
            raise ValueError("scale variables must be positive")

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, i: int) -> GeneratedSample:
        return GeneratedSample(
            self.x[i], self.z[i], float(self.u1[i]), float(self.u2[i])
        )

    def __iter__(self) -> Iterator[GeneratedSample]:
        for i in range(len(self)):
            yield self[i]


def _gamma_scales(nu: float, n: int, rng: np.random.Generator) -> np.ndarray:
    # Ga(nu/2, nu/2) under the rate convention; numpy takes a scale parameter.
    return rng.gamma(nu / 2.0, 2.0 / nu, size=n)


def gen_cl(p: ModelParams, n: int, rng=None) -> GeneratedSamples:
    """Sample the two-scale hierarchy: independent data and latent t layers.

    u1 ~ Ga(nu1/2, nu1/2), u2 ~ Ga(nu2/2, nu2/2) independently,
    z|u2 ~ N(0, I/u2), x|z,u1 ~ N(Wz + mu, sigma2 I / u1).

    Draw order is u1, u2, eps_z, eps_x (each as one block of n).
    """
    if p.dof.variant != "pair":
        raise ValueError("gen_cl requires a pair-dof model")
    rng = as_generator(rng)
    nu1, nu2 = p.dof.nu_pair
    q, d = p.q, p.d
    u1 = _gamma_scales(nu1, n, rng)
    u2 = _gamma_scales(nu2, n, rng)
    z = rng.standard_normal((n, d)) / np.sqrt(u2)[:, None]
    x = p.mu + z @ p.W.T + rng.standard_normal((n, q)) * np.sqrt(p.sigma2 / u1)[:, None]
    return GeneratedSamples(x, z, u1, u2)


def gen_conditional(p: ModelParams, n: int, rng=None) -> GeneratedSamples:
    """Sample the conditional model: Gaussian latents, t data layer.

    z ~ N(0, I), u ~ Ga(nu/2, nu/2), x|z,u ~ N(Wz + mu, sigma2 I / u).
    With a Gaussian dof the scale draw is skipped and this is exactly the
    classical probabilistic PCA sampler.

    Draw order is z, u, eps_x.
    """
    if p.dof.variant not in ("single", "gaussian"):
        raise ValueError("gen_conditional requires a single-dof or Gaussian model")
    rng = as_generator(rng)
    q, d = p.q, p.d
    z = rng.standard_normal((n, d))
    if p.dof.is_gaussian:
        u = np.ones(n)
    else:
        u = _gamma_scales(p.dof.nu, n, rng)
    x = p.mu + z @ p.W.T + rng.standard_normal((n, q)) * np.sqrt(p.sigma2 / u)[:, None]
    return GeneratedSamples(x, z, u, np.ones(n))


def gen_marginal(p: ModelParams, n: int, rng=None) -> GeneratedSamples:
    """Sample the shared-scale hierarchy behind the marginal t model.

    A single u ~ Ga(nu/2, nu/2) rescales both layers: z|u ~ N(0, I/u),
    x|z,u ~ N(Wz + mu, sigma2 I / u).  Marginally x ~ t_nu(mu, WW^T + sigma2 I).

    Draw order is u, eps_z, eps_x.
    """
    if p.dof.variant != "single":
        raise ValueError("gen_marginal requires a single-dof model")
    rng = as_generator(rng)
    q, d = p.q, p.d
    u = _gamma_scales(p.dof.nu, n, rng)
    z = rng.standard_normal((n, d)) / np.sqrt(u)[:, None]
    x = p.mu + z @ p.W.T + rng.standard_normal((n, q)) * np.sqrt(p.sigma2 / u)[:, None]
    return GeneratedSamples(x, z, u, u)


def equicorrelation(q: int, rho: float) -> np.ndarray:
    """Correlation matrix with unit variances and constant off-diagonal rho."""
    if not (abs(rho) < 1):
        raise ValueError(f"rho must satisfy |rho| < 1, got {rho}")
    if q > 1 and rho <= -1.0 / (q - 1):
        raise ValueError(
            f"rho={rho} makes the equicorrelation matrix indefinite for q={q}"
        )
    return (1.0 - rho) * np.eye(q) + rho * np.ones((q, q))


def gen_experiment(
    q: int,
    n_clean: int,
    rho: float,
    outliers: OutlierSpec,
    rng=None,
    seed: Optional[int] = None,
) -> Dataset:
    """Simulation dataset: correlated Gaussian rows plus uniform box outliers.

    The clean rows are N(0, Sigma_rho) with the equicorrelation matrix, drawn
    first; the outlier rows are i.i.d. uniform on [-h, h]^q and appended. The
    returned mask marks the outlier rows.
    """
    rng = as_generator(rng)
    sigma = equicorrelation(q, rho)
    L = np.linalg.cholesky(sigma)
    clean = rng.standard_normal((n_clean, q)) @ L.T
    h = outliers.box_halfwidth
    wild = rng.uniform(-h, h, size=(outliers.count, q))
    mask = np.zeros(n_clean + outliers.count, dtype=bool)
    mask[n_clean:] = True
    return Dataset(X=np.vstack([clean, wild]), outlier_mask=mask, seed=seed)


def check_scale_matrix_limit(nu: float, d: int, sigma2: float = 1.0) -> float:
    """Expected conditional noise scale E[(nu + z'z)/(nu + d)] * sigma2.

    With z ~ t_nu(0, I_d) this equals sigma2 * (nu + nu*d/(nu-2)) / (nu + d),
    which tends to sigma2 as nu grows. The second moment of z only exists for
    nu > 2.
    """
    if not (nu > 2):
        raise ValueError(f"nu must exceed 2 for the latent second moment, got {nu}")
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    if not (sigma2 > 0):
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return sigma2 * (nu + nu * d / (nu - 2.0)) / (nu + d)
