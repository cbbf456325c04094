"""Score equation for the degrees-of-freedom updates.

Both t layers lead to the same one-dimensional score in nu,

    s(nu) = 1 + log(nu/2) - psi(nu/2) + c,

where c is the average of <log u_n> - <u_n> over observations. Jensen's
inequality gives c <= -1 with equality only for u degenerate at 1, and
log(x) - psi(x) is strictly decreasing from +inf to 0, so s is strictly
decreasing with a unique root whenever c < -1 puts it inside the bracket.
"""

from __future__ import annotations

import math
import warnings

import scipy.optimize
import scipy.special


def nu_score(nu: float, c: float) -> float:
    """Evaluate the dof score s(nu) = 1 + log(nu/2) - psi(nu/2) + c."""
    if not (nu > 0):
        raise ValueError(f"nu must be positive, got {nu}")
    half = nu / 2.0
    return 1.0 + math.log(half) - scipy.special.digamma(half) + c


def solve_nu(c: float, bracket: tuple, xtol: float = 1e-8) -> float:
    """Root of the dof score on ``bracket``, clamping when no root exists.

    The score is strictly decreasing, so a missing sign change means the
    constrained maximizer sits at an endpoint: the upper one when the scale
    variables look Gaussian (s > 0 everywhere, c >= -1), the lower one when
    they are extremely dispersed. Clamping is reported with a warning.
    """
    lo, hi = bracket
    if not (0 < lo < hi):
        raise ValueError(f"invalid nu bracket {bracket}")
    s_lo = nu_score(lo, c)
    s_hi = nu_score(hi, c)
    if s_lo <= 0.0:
        if s_lo < 0.0:
            warnings.warn(
                f"dof update clamped at lower bound {lo}", RuntimeWarning, stacklevel=2
            )
        return lo
    if s_hi >= 0.0:
        if s_hi > 0.0:
            warnings.warn(
                f"dof update clamped at upper bound {hi}", RuntimeWarning, stacklevel=2
            )
        return hi
    return float(
        scipy.optimize.bisect(nu_score, lo, hi, args=(c,), xtol=xtol)
    )
