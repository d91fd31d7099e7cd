"""Signature security calculus: Eve's error rate, thresholds, the three failure
probabilities, the minimal signature length L and the signature rate."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimation import BlockBounds, EstimationContext, keep_half_error_bound
from .mathcore import SecurityBudget, binary_entropy, inverse_binary_entropy


class Infeasible(ValueError):
    """No secure signing is possible at these settings."""


@dataclass(frozen=True)
class KeyAccounting:
    n_Z: float
    n_test: float
    n_pool: float
    E_test: float

    @classmethod
    def from_sifted(cls, n_Z: float, r_ET: float, E_test: float) -> "KeyAccounting":
        n_test = float(round(r_ET * n_Z))
        return cls(n_Z=n_Z, n_test=n_test, n_pool=n_Z - n_test, E_test=E_test)


@dataclass
class SignatureReport:
    L: int = 0
    n_pool: float = 0.0
    n_L1_lower: float = 0.0
    e_L1_upper: float = 0.5
    P_e: float = 0.0
    E_keep: float = 0.5
    s_a: float = 0.0
    s_v: float = 0.0
    P_robust: float = 1.0
    P_repudiation: float = 1.0
    P_forge: float = 1.0
    n_bits: float = 0.0
    R: float = 0.0
    feasible: bool = False
    # best security level reachable with the whole pool (L = n_pool); guides optimizers
    eps_at_max_L: float = 1.0
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def min_entropy_bound(bb: BlockBounds) -> float:
    return max(bb.n_L1_lower * (1.0 - binary_entropy(bb.e_L1_upper)), 0.0)


def eve_error_rate(bb: BlockBounds, L: float) -> float:
    """Minimal error rate Eve introduces on the kept half, from its min-entropy per bit."""
    if L < 2:
        raise ValueError("L must be at least 2")
    h = 2.0 * min_entropy_bound(bb) / L
    return inverse_binary_entropy(min(max(h, 0.0), 1.0))


def thresholds(E_keep: float, P_e: float) -> tuple[float, float]:
    """Split [E_keep, P_e] in thirds: (authentication, verification) thresholds."""
    if P_e <= E_keep:
        raise Infeasible(f"infeasible: P_e ({P_e:.3g}) <= E_keep ({E_keep:.3g})")
    gap = P_e - E_keep
    return E_keep + gap / 3.0, E_keep + 2.0 * gap / 3.0


def p_robust(budget: SecurityBudget) -> float:
    return min(1.0, 2.0 * budget.eps_PE)


def p_repudiation(s_a: float, s_v: float, L: float) -> float:
    return min(1.0, 2.0 * math.exp(-((s_v - s_a) ** 2) * L / 4.0))


def forge_exponent(L: float, bb: BlockBounds, s_v: float) -> float:
    """Bits of protection (L/2) * [(2 n_L1 / L)(1 - H2(e_L1)) - H2(s_v)]; <= 0 means vacuous."""
    return (L / 2.0) * (2.0 * min_entropy_bound(bb) / L - binary_entropy(s_v))


def p_forge(L: float, bb: BlockBounds, s_v: float, budget: SecurityBudget,
            eps: float | None = None) -> float:
    """Forging probability bound.

    ``eps`` is the min-entropy smoothing parameter inside eps_F; it defaults to
    ``budget.eps_smooth``.
    """
    if eps is None:
        eps = budget.eps_smooth
    bits = forge_exponent(L, bb, s_v)
    eps_F = (2.0 ** (-bits) + eps) / budget.g if bits > -1000 else math.inf
    total = budget.g + eps_F + budget.eps_PE + bb.eps_nL1 + bb.eps_eL1
    return min(1.0, total)


@dataclass
class BlockEvaluation:
    L: int
    bb: BlockBounds
    P_e: float
    E_keep: float
    s_a: float
    s_v: float
    P_robust: float
    P_repudiation: float
    P_forge: float

    @property
    def level(self) -> float:
        return max(self.P_robust, self.P_repudiation, self.P_forge)


def evaluate_block(ctx: EstimationContext, ka: KeyAccounting, budget: SecurityBudget, L: int) -> BlockEvaluation:
    """Run the full L-dependent chain. Infeasible thresholds give level 1."""
    bb = ctx.block(L)
    P_e = eve_error_rate(bb, L)
    E_keep = keep_half_error(ka, L, budget)
    rob = p_robust(budget)
    if P_e <= E_keep:
        return BlockEvaluation(L, bb, P_e, E_keep, math.nan, math.nan, rob, 1.0, 1.0)
    s_a, s_v = thresholds(E_keep, P_e)
    return BlockEvaluation(L, bb, P_e, E_keep, s_a, s_v, rob,
                           p_repudiation(s_a, s_v, L), p_forge(L, bb, s_v, budget))


def keep_half_error(ka: KeyAccounting, L: float, budget: SecurityBudget) -> float:
    # Bob and Charlie channels are symmetric, so the max over recipients is one evaluation.
    return keep_half_error_bound(ka.E_test, L, ka.n_test, budget.eps_PE)


def _max_half(ka: KeyAccounting) -> int:
    return int(math.floor(ka.n_pool / 2.0))


def _min_half(ka: KeyAccounting, budget: SecurityBudget) -> int:
    """Smallest L/2 the repudiation bound can possibly accept.

    Uses s_v - s_a = (P_e - E_keep)/3 <= (0.5 - E_test)/3, which holds at any L.
    """
    if budget.eps_target >= 1.0:
        return 1
    gap = (0.5 - ka.E_test) / 3.0
    if gap <= 0:
        return _max_half(ka) + 1
    return max(1, math.ceil(2.0 * math.log(2.0 / budget.eps_target) / gap ** 2))


@dataclass
class LengthSearch:
    L: int | None
    evaluation: BlockEvaluation | None
    at_max: BlockEvaluation | None
    notes: list = field(default_factory=list)


def signature_length(ka: KeyAccounting, ctx: EstimationContext, budget: SecurityBudget,
                     linear: bool = False) -> LengthSearch:
    """Smallest even L in [2, n_pool] meeting the security target.

    The whole pool is evaluated first. The search then doubles L/2 upward from
    the repudiation lower bound and bisects. The monotonicity this relies on
    is spot-checked on geometric grids; a detected violation falls back to a
    linear scan. ``linear=True`` scans every even L from 2 (brute force).
    """
    notes: list = []
    kmax = _max_half(ka)
    if kmax < 1:
        return LengthSearch(None, None, None, ["key pool smaller than 2"])
    target = budget.eps_target
    at_max = evaluate_block(ctx, ka, budget, 2 * kmax)

    def ok(k: int) -> BlockEvaluation | None:
        ev = at_max if k == kmax else evaluate_block(ctx, ka, budget, 2 * k)
        return ev if ev.level <= target else None

    if linear:
        return _scan(ok, 1, kmax, at_max, notes)

    k_lb = _min_half(ka, budget)
    if k_lb > kmax:
        return LengthSearch(None, None, at_max, ["repudiation bound needs more keys than the pool holds"])

    hi, hit = None, None
    if at_max.level <= target:
        hi, hit = kmax, at_max
    else:
        for p in _geometric(k_lb, kmax - 1, 8):
            ev = ok(p)
            if ev is not None:
                notes.append("feasible below n_pool but not at n_pool (non-monotone)")
                hi, hit = p, ev
                break
        if hi is None:
            return LengthSearch(None, None, at_max, notes + ["no L up to n_pool meets the security target"])

    lo = k_lb - 1
    k = k_lb
    while k < hi:
        ev = ok(k)
        if ev is not None:
            hi, hit = k, ev
            break
        lo = k
        k *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ev = ok(mid)
        if ev is not None:
            hi, hit = mid, ev
        else:
            lo = mid

    if any(ok(p) is not None for p in _geometric(k_lb, hi - 1, 6)):
        notes.append("non-monotone feasibility detected; fell back to linear scan")
        return _scan(ok, k_lb, hi, at_max, notes)
    return LengthSearch(2 * hi, hit, at_max, notes)


def _geometric(a: int, b: int, num: int) -> list[int]:
    if b < a:
        return []
    return [int(p) for p in np.unique(np.round(np.geomspace(a, b, num=min(num, b - a + 1))))]


def _scan(ok, k_start, k_stop, at_max, notes):
    for k in range(k_start, k_stop + 1):
        ev = ok(k)
        if ev is not None:
            return LengthSearch(2 * k, ev, at_max, notes)
    return LengthSearch(None, None, at_max, notes + ["no L up to n_pool meets the security target"])


def signature_rate(ka: KeyAccounting, N: float, L: int | None, ev: BlockEvaluation | None,
                   budget: SecurityBudget, notes: list | None = None) -> SignatureReport:
    """Assemble the report; n_bits = n_pool / (2L) and R = n_bits / N."""
    report = SignatureReport(n_pool=ka.n_pool, diagnostics=list(notes or []))
    if L is None or ev is None:
        report.P_robust = p_robust(budget)
        return report
    report.L = int(L)
    report.n_L1_lower = ev.bb.n_L1_lower
    report.e_L1_upper = ev.bb.e_L1_upper
    report.P_e = ev.P_e
    report.E_keep = ev.E_keep
    report.s_a, report.s_v = ev.s_a, ev.s_v
    report.P_robust = ev.P_robust
    report.P_repudiation = ev.P_repudiation
    report.P_forge = ev.P_forge
    report.n_bits = ka.n_pool / (2.0 * L)
    report.R = report.n_bits / N
    report.feasible = True
    report.diagnostics.extend(ev.bb.notes)
    return report
