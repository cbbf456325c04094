"""Core domain types shared by every sampler and estimator.

The model family is parameterized by a loading matrix ``W`` (q x d), a mean
vector ``mu`` (q,), an isotropic noise scale ``sigma2``, and a degrees-of-freedom
specification that selects one of three variants:

* ``gaussian`` -- both latent scale variables degenerate at 1 (classical PPCA);
* ``single``   -- one degrees-of-freedom parameter nu (marginal-t and
  conditional-t models);
* ``pair``     -- independent nu1 (data layer) and nu2 (latent layer), the
  two-scale "cl-t" family.

Each nu is either fixed or estimated within a bracket. All types here are
immutable value objects and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ._utils import check_matrix, check_vector

#: Default search bracket and starting value for an estimated nu. Covers
#: Cauchy-like tails up to effectively Gaussian behaviour.
NU_LOWER_DEFAULT = 0.05
NU_UPPER_DEFAULT = 500.0
NU_INIT_DEFAULT = 5.0

GAUSSIAN = "gaussian"
SINGLE_NU = "single"
PAIR_NU = "pair"


@dataclass(frozen=True, slots=True)
class NuSetting:
    """One degrees-of-freedom parameter: a fixed value or an estimation setup.

    ``value`` is the fixed value when ``estimate`` is False and the starting
    value otherwise; ``lower``/``upper`` bracket the search when estimating.
    """

    value: float
    estimate: bool = False
    lower: float = NU_LOWER_DEFAULT
    upper: float = NU_UPPER_DEFAULT

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value <= 0:
            raise ValueError(f"nu must be a positive finite number, got {self.value}")
        if self.estimate and not (0 < self.lower < self.upper):
            raise ValueError(
                f"nu bracket must satisfy 0 < lower < upper, got ({self.lower}, {self.upper})"
            )

    @property
    def bracket(self) -> tuple[float, float]:
        return (self.lower, self.upper)


@dataclass(frozen=True, slots=True)
class DofSpec:
    """Degrees-of-freedom variant tag plus its nu settings.

    ``nus`` is empty for the Gaussian variant, one entry for single-nu models
    and two entries (data layer first, latent layer second) for the pair
    variant. The pair variant is only legal for the cl-t family; estimators
    enforce that at their entry points.
    """

    variant: str
    nus: tuple[NuSetting, ...] = ()

    def __post_init__(self):
        expected = {GAUSSIAN: 0, SINGLE_NU: 1, PAIR_NU: 2}.get(self.variant)
        if expected is None:
            raise ValueError(f"unknown dof variant {self.variant!r}")
        if len(self.nus) != expected:
            raise ValueError(
                f"dof variant {self.variant!r} takes {expected} nu settings, got {len(self.nus)}"
            )

    @staticmethod
    def gaussian() -> "DofSpec":
        return DofSpec(GAUSSIAN)

    @staticmethod
    def single(nu: float) -> "DofSpec":
        return DofSpec(SINGLE_NU, (NuSetting(nu),))

    @staticmethod
    def single_estimated(
        init: float = NU_INIT_DEFAULT,
        lower: float = NU_LOWER_DEFAULT,
        upper: float = NU_UPPER_DEFAULT,
    ) -> "DofSpec":
        return DofSpec(SINGLE_NU, (NuSetting(init, estimate=True, lower=lower, upper=upper),))

    @staticmethod
    def pair(nu1: float, nu2: float) -> "DofSpec":
        return DofSpec(PAIR_NU, (NuSetting(nu1), NuSetting(nu2)))

    @staticmethod
    def pair_estimated(
        init1: float = NU_INIT_DEFAULT,
        init2: float = NU_INIT_DEFAULT,
        lower: float = NU_LOWER_DEFAULT,
        upper: float = NU_UPPER_DEFAULT,
    ) -> "DofSpec":
        return DofSpec(
            PAIR_NU,
            (
                NuSetting(init1, estimate=True, lower=lower, upper=upper),
                NuSetting(init2, estimate=True, lower=lower, upper=upper),
            ),
        )

    @property
    def is_gaussian(self) -> bool:
        return self.variant == GAUSSIAN

    @property
    def nu(self) -> float:
        """The single nu value (single variant only)."""
        if self.variant != SINGLE_NU:
            raise ValueError(f"dof variant {self.variant!r} has no single nu")
        return self.nus[0].value

    @property
    def nu_pair(self) -> tuple[float, float]:
        """(nu1, nu2) for the pair variant."""
        if self.variant != PAIR_NU:
            raise ValueError(f"dof variant {self.variant!r} has no nu pair")
        return (self.nus[0].value, self.nus[1].value)

    def with_values(self, *values: float) -> "DofSpec":
        """Copy of this spec with updated nu values (bounds and flags kept)."""
        if len(values) != len(self.nus):
            raise ValueError(f"expected {len(self.nus)} values, got {len(values)}")
        nus = tuple(
            NuSetting(v, estimate=s.estimate, lower=s.lower, upper=s.upper)
            for v, s in zip(values, self.nus)
        )
        return DofSpec(self.variant, nus)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of one model: loading matrix, mean, noise scale, dof."""

    W: np.ndarray
    mu: np.ndarray
    sigma2: float
    dof: DofSpec = field(default_factory=DofSpec.gaussian)

    def __post_init__(self):
        object.__setattr__(self, "W", _freeze(np.atleast_2d(self.W)))
        object.__setattr__(self, "mu", _freeze(np.atleast_1d(self.mu)))
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def q(self) -> int:
        """Ambient (data) dimension."""
        return self.W.shape[0]

    @property
    def d(self) -> int:
        """Latent dimension."""
        return self.W.shape[1]


def validate_params(p: ModelParams) -> None:
    """Raise ``ValueError`` naming the offending field if any invariant fails.

    Checked: W and mu finite with matching shapes, q >= d >= 1, sigma2 > 0
    finite, every nu in the dof spec positive.
    """
    W = np.asarray(p.W)
    if W.ndim != 2:
        raise ValueError(f"W must be a matrix, got ndim={W.ndim}")
    q, d = W.shape
    if d < 1 or q < d:
        raise ValueError(f"W must satisfy q >= d >= 1, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("W contains non-finite entries")
    mu = np.asarray(p.mu)
    if mu.shape != (q,):
        raise ValueError(f"mu must have shape ({q},) to match W, got {mu.shape}")
    if not np.all(np.isfinite(mu)):
        raise ValueError("mu contains non-finite entries")
    if not np.isfinite(p.sigma2) or p.sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive and finite, got {p.sigma2}")
    for i, s in enumerate(p.dof.nus):
        if not np.isfinite(s.value) or s.value <= 0:
            raise ValueError(f"dof nu[{i}] must be positive, got {s.value}")


@dataclass(frozen=True)
class Dataset:
    """An N x q observation matrix plus provenance metadata.

    ``outlier_mask`` marks injected outlier rows when the data came from the
    experiment generator; ``seed`` records the generating stream when known.
    """

    X: np.ndarray
    outlier_mask: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        X = check_matrix(self.X, "X")
        object.__setattr__(self, "X", _freeze(X))
        if self.outlier_mask is not None:
            mask = np.asarray(self.outlier_mask, dtype=bool)
            if mask.shape != (X.shape[0],):
                raise ValueError(
                    f"outlier_mask must have length {X.shape[0]}, got shape {mask.shape}"
                )
            mask = mask.copy()
            mask.setflags(write=False)
            object.__setattr__(self, "outlier_mask", mask)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1]

    def clean_rows(self) -> np.ndarray:
        """Rows not flagged as injected outliers (all rows when no mask)."""
        if self.outlier_mask is None:
            return self.X
        return self.X[~self.outlier_mask]


def as_dataset(data) -> Dataset:
    """Coerce a raw array into a :class:`Dataset` (pass-through for datasets)."""
    if isinstance(data, Dataset):
        return data
    return Dataset(X=np.asarray(data, dtype=float))


class TraceEntry(NamedTuple):
    """One optimizer iteration: objective value and relative parameter change."""

    iteration: int
    objective: float
    param_delta: float


@dataclass(frozen=True)
class FitResult:
    """What every fit returns: final parameters plus the convergence record."""

    params: ModelParams
    n_iter: int
    converged: bool
    trace: tuple[TraceEntry, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        trace = tuple(TraceEntry(*t) for t in self.trace)
        object.__setattr__(self, "trace", trace)
        if len(trace) != self.n_iter:
            raise ValueError(
                f"trace length {len(trace)} must equal n_iter {self.n_iter}"
            )

    @property
    def objectives(self) -> np.ndarray:
        return np.array([t.objective for t in self.trace])


def param_change(old: ModelParams, new: ModelParams) -> float:
    """Relative change between parameter sets in stacked Frobenius norm."""
    def stack(p: ModelParams) -> np.ndarray:
        parts = [p.W.ravel(), p.mu, [p.sigma2]]
        parts.extend([[s.value] for s in p.dof.nus])
        return np.concatenate([np.asarray(x, dtype=float).ravel() for x in parts])

    a, b = stack(old), stack(new)
    denom = max(float(np.linalg.norm(a)), 1e-12)
    return float(np.linalg.norm(b - a)) / denom
