"""Bounds on the number of subsamples needed to see all true features.

For s >= p0, a single subsample of size s captures all p0 important
features with probability alpha = prod_{k=0}^{p0-1} (s-k)/(p-k).  Requiring
capture at least once in m independent subsamples with probability 1-gamma
gives m = log(gamma) / log(1-alpha); bounding alpha by
((s-p0+1)/(p-p0+1))^p0 <= alpha <= (s/p)^p0 brackets m.  These are
worst-case ("all features in one subsample") benchmarks and deliberately
conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["MBounds", "capture_probability", "m_bounds", "exact_m"]


@dataclass(frozen=True)
class MBounds:
    """Real-valued bracket on the required subsample count.

    ``alpha_lower``/``alpha_upper`` are the per-subsample capture-probability
    bounds the bracket is derived from.  Callers ceil ``lower``/``upper``
    for a usable count.
    """

    lower: float
    upper: float
    alpha_lower: float
    alpha_upper: float


def _validate(p: int, p0: int, s: int) -> None:
    if p0 < 0:
        raise ValueError(f"p0 must be nonnegative, got {p0}")
    if p0 > s:
        raise ValueError(f"p0={p0} exceeds subsample size s={s}")
    if s > p:
        raise ValueError(f"s={s} exceeds p={p}")
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")


def capture_probability(p: int, p0: int, s: int) -> float:
    """Exact probability that one size-s subsample contains all p0 features.

    Computed as a product of ratios (log-space for deep sparsity), never via
    factorials, so large p cannot overflow.
    """
    _validate(p, p0, s)
    if p0 == 0:
        return 1.0
    if p0 > 30:
        log_a = sum(math.log(s - k) - math.log(p - k) for k in range(p0))
        return math.exp(log_a)
    a = 1.0
    for k in range(p0):
        a *= (s - k) / (p - k)
    return a


def _pow_ratio(num: int, den: int, p0: int) -> float:
    if num == den:
        return 1.0
    if num <= 0:
        return 0.0
    return math.exp(p0 * (math.log(num) - math.log(den)))


def _m_from_alpha(alpha: float, gamma: float) -> float:
    if alpha >= 1.0:
        return 1.0  # certain capture: one subsample suffices
    if alpha <= 0.0:
        return math.inf
    return math.log(gamma) / math.log1p(-alpha)


def exact_m(p: int, p0: int, s: int, gamma: float) -> float:
    """Subsample count achieving capture probability 1-gamma at the exact alpha."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0,1), got {gamma}")
    return _m_from_alpha(capture_probability(p, p0, s), gamma)


def m_bounds(p: int, p0: int, s: int, gamma: float) -> MBounds:
    """Lower/upper bounds on the subsample count for capture probability 1-gamma.

    At s == p (or p0 == 0) capture is certain and both bounds collapse to 1,
    returned explicitly rather than through log(0).
    """
    _validate(p, p0, s)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0,1), got {gamma}")
    if s == p or p0 == 0:
        return MBounds(lower=1.0, upper=1.0, alpha_lower=1.0, alpha_upper=1.0)
    alpha_upper = _pow_ratio(s, p, p0)
    alpha_lower = _pow_ratio(s - p0 + 1, p - p0 + 1, p0)
    return MBounds(
        lower=_m_from_alpha(alpha_upper, gamma),
        upper=_m_from_alpha(alpha_lower, gamma),
        alpha_lower=alpha_lower,
        alpha_upper=alpha_upper,
    )
