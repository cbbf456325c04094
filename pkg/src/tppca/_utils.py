"""Shared helpers: random stream plumbing and array checks."""

from __future__ import annotations

import numpy as np


def as_generator(random_state=None) -> np.random.Generator:
    """Coerce ``random_state`` into a ``numpy.random.Generator``.

    Accepts None (fresh OS entropy), an integer seed, a ``SeedSequence``,
    or an existing ``Generator`` (returned unchanged).
    """
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def split_stream(root_seed: int, index: int) -> np.random.Generator:
    """Independent child stream ``index`` of the stream family ``root_seed``.

    The mapping (root_seed, index) -> stream is fixed, so work distributed
    over a pool by index reproduces exactly regardless of scheduling order.
    """
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=(index,)))


def check_matrix(X, name: str = "X") -> np.ndarray:
    """Validate a 2-D finite float matrix with at least one row."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got ndim={X.ndim}")
    if X.shape[0] < 1:
        raise ValueError(f"{name} must have at least one row")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_vector(v, name: str = "v") -> np.ndarray:
    """Validate a 1-D finite float vector."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v
