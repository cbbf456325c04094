"""Principal-angle distance between estimated and true subspaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._utils import check_matrix


@dataclass(frozen=True)
class Subspace:
    """A d-dimensional subspace of R^q stored as an orthonormal basis (q x d)."""

    basis: np.ndarray

    def __post_init__(self):
        B = check_matrix(self.basis, "basis")
        q, d = B.shape
        if d > q:
            raise ValueError(f"basis has more columns ({d}) than rows ({q})")
        if not np.allclose(B.T @ B, np.eye(d), atol=1e-10):
            raise ValueError("basis columns must be orthonormal within 1e-10")
        object.__setattr__(self, "basis", B)

    @property
    def q(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]


def orthonormalize(W) -> Subspace:
    """Subspace spanned by the columns of W, via an SVD basis.

    Raises if W is (numerically) column rank deficient, since the span would
    then have lower dimension than the column count suggests.
    """
    W = check_matrix(W, "W")
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    if s[-1] <= 1e-10 * s[0]:
        raise ValueError("W is column rank deficient; its span is degenerate")
    return Subspace(U)


def first_principal_angle(a: Subspace, b: Subspace) -> float:
    """Smallest angle (radians, in [0, pi/2]) between two subspaces of R^q.

    This is the minimum over unit vectors u in a, v in b of the angle between
    u and v; equivalently arccos of the largest singular value of A^T B.
    """
    if a.q != b.q:
        raise ValueError(f"subspaces live in different ambient spaces: {a.q} vs {b.q}")
    if a.d == 1 and b.d == 1:
        c = abs(float(a.basis[:, 0] @ b.basis[:, 0]))
    else:
        # Order the pair canonically so angle(a, b) and angle(b, a) run the
        # SVD on the same matrix and agree to the last bit.
        lo, hi = sorted((a, b), key=lambda s: (s.d, s.basis.tobytes()))
        c = np.linalg.svd(lo.basis.T @ hi.basis, compute_uv=False)[0]
    return float(np.arccos(np.clip(c, 0.0, 1.0)))
