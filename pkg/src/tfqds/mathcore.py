"""Entropy functions and concentration-inequality primitives.

All functions are scalar and pure. Counts are carried as floats because the
analytic channel model produces fractional expected values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

INVERSE_ENTROPY_TOL = 1e-12


def _check_probability(p: float, name: str = "p") -> None:
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"{name} must lie in [0, 1], got {p!r}")


def _check_eps(eps: float) -> None:
    # eps == 1 is accepted: ln(1/eps) = 0 switches fluctuations off.
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"failure probability must lie in (0, 1], got {eps!r}")


@dataclass(frozen=True)
class SecurityBudget:
    """Failure probabilities and the overall security target.

    ``eps_smooth`` is the smoothing parameter of the min-entropy that appears
    inside the forging bound (it is divided by ``g`` there, so it must be far
    below ``g * eps_target``).
    """

    eps_PE: float = 1e-12
    eps_SF: float = 1e-12
    g: float = 1e-12
    eps_target: float = 1e-5
    eps_smooth: float = 1e-30

    def __post_init__(self):
        for name in ("eps_PE", "eps_SF", "g", "eps_target", "eps_smooth"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value!r}")
        for name in ("eps_PE", "eps_SF", "g"):
            if not getattr(self, name) < self.eps_target:
                raise ValueError(f"eps_target must exceed {name}, otherwise signing always aborts")


def _h2(p: float) -> float:
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy(p: float) -> float:
    """Binary Shannon entropy in bits, with 0*log2(0) = 0."""
    _check_probability(p)
    return _h2(p)


def _h2_slope(p: float) -> float:
    return math.log2((1.0 - p) / p)


def inverse_binary_entropy(h: float, tol: float = INVERSE_ENTROPY_TOL) -> float:
    """Return the p in [0, 0.5] with binary_entropy(p) == h.

    Newton steps safeguarded by a bisection bracket on [0, 0.5], where the
    entropy is strictly increasing. The slope diverges at 0, so a Newton step
    that would leave the bracket or converge too slowly is replaced by a
    bisection step. The step tolerance is divided by the local slope, which
    keeps both p and binary_entropy(p) within ``tol`` of the target.
    """
    _check_probability(h, "h")
    if h == 0.0:
        return 0.0
    if h == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    x = 0.25
    dx = dx_old = hi - lo
    f, df = _h2(x) - h, _h2_slope(x)
    for _ in range(200):
        if ((x - hi) * df - f) * ((x - lo) * df - f) > 0 or abs(2.0 * f) > abs(dx_old * df):
            dx_old, dx = dx, 0.5 * (hi - lo)
            x = lo + dx
        else:
            dx_old, dx = dx, f / df
            x -= dx
        if abs(dx) < tol / max(1.0, df) or hi - lo < 4e-16 * max(x, 1e-300):
            return x
        f, df = _h2(x) - h, _h2_slope(x)
        if f == 0.0:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
    return x


def hoeffding_delta(x: float, eps: float) -> float:
    """Hoeffding deviation sqrt(x ln(1/eps) / 2)."""
    if x < 0:
        raise ValueError(f"count must be nonnegative, got {x!r}")
    _check_eps(eps)
    return math.sqrt(x * math.log(1.0 / eps) / 2.0)


def fluctuate(x: float, eps: float, direction: str) -> float:
    """Shift an observed count by its Hoeffding deviation.

    ``direction`` is ``"lower"`` (clamped at zero) or ``"upper"``.
    """
    delta = hoeffding_delta(x, eps)
    if direction == "lower":
        return max(x - delta, 0.0)
    if direction == "upper":
        return x + delta
    raise ValueError(f"direction must be 'lower' or 'upper', got {direction!r}")


def serfling_upsilon(x: float, y: float, eps: float) -> float:
    """Sampling-without-replacement deviation sqrt((x+1)(x+y) ln(1/eps) / (2y))."""
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    if y <= 0:
        raise ValueError(f"y must be positive, got {y!r}")
    _check_eps(eps)
    return math.sqrt((x + 1.0) * (x + y) * math.log(1.0 / eps) / (2.0 * y))


def serfling_lambda(x: float, y: float, eps: float) -> float:
    """Deviation of a size-y sample drawn from x items: sqrt((x-y+1) y ln(1/eps) / (2x))."""
    if x <= 0:
        raise ValueError(f"population must be positive, got {x!r}")
    if y < 0 or y > x:
        raise ValueError(f"sample size must lie in [0, {x!r}], got {y!r}")
    _check_eps(eps)
    return math.sqrt((x - y + 1.0) * y * math.log(1.0 / eps) / (2.0 * x))
