"""Finite-size estimation of single-photon statistics.

The chain runs X-window decoy bounds -> single-photon populations -> Z-window
single-photon bounds -> bounds on the kept half of one signature block.
Every intermediate is clamped into its physical range; clamps are recorded in
the ``notes`` lists so callers can surface them. Error-rate upper bounds are
clamped at 0.5: beyond that the bound says nothing, and 1 - H2(e) would
wrongly start to grow again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .channel import INTENSITY_LABELS, ChannelObservables, ProtocolParams
from .mathcore import fluctuate, hoeffding_delta, serfling_lambda, serfling_upsilon

# Number of eps_SF-sized failure events behind each block-level bound.
N_FLUCTUATIONS_COUNT_BOUND = 17
N_FLUCTUATIONS_ERROR_BOUND = 4


class EstimationFailure(ValueError):
    """The decoy estimate carries no information at these settings."""


@dataclass
class XWindowBounds:
    n_X1_lower: float
    m_X1_upper: float
    e_X1_upper: float
    tau_X1: float
    notes: list = field(default_factory=list)


@dataclass
class ZWindowBounds:
    N_Z1_lower: float
    N_X1_upper: float
    n_Z1_lower: float
    m_Z1_upper: float
    e_Z1_upper: float
    notes: list = field(default_factory=list)


@dataclass
class BlockBounds:
    n_L1_lower: float
    e_L1_upper: float
    eps_nL1: float
    eps_eL1: float
    notes: list = field(default_factory=list)


def tau_x1(proto: ProtocolParams) -> float:
    """Probability of a single-photon component across all X-window intensity pairs."""
    total = 0.0
    for a in INTENSITY_LABELS:
        for b in INTENSITY_LABELS:
            s = proto.intensity(a) + proto.intensity(b)
            total += proto.combination_prob(a, b) * s * math.exp(-s)
    return total


ERROR_FORMS = ("corrected", "printed", "photon-number")


def decoy_bounds_x(obs: ChannelObservables, proto: ProtocolParams, eps_SF: float,
                   error_form: str = "corrected") -> XWindowBounds:
    """Decoy-state lower bound on X-window single-photon counts and upper bound on their errors.

    ``error_form`` selects the single-photon error-count bound:

    * ``"corrected"``: tau/(v-w) * [e^v m_vv/P_vv - e^w m_ww/P_ww] (default)
    * ``"printed"``: the same with e^v on both terms, as typeset in the source
      derivation; the e^v weight on the subtracted term shrinks the bound
    * ``"photon-number"``: tau/(2(v-w)) * [e^{2v} m_vv/P_vv - e^{2w} m_ww/P_ww],
      from expanding effective events in the total photon number 2a; sound by
      construction and much tighter at large misalignment
    """
    w, v = proto.w, proto.v
    if v - w <= 1e-8:
        raise EstimationFailure("degenerate decoy pair: v - w too small")
    tau = tau_x1(proto)
    P = obs.P_ab
    if P["00"] <= 0:
        raise EstimationFailure("vacuum probability p_0 is zero; dark counts cannot be estimated")
    notes = []

    n_w = fluctuate(obs.n_0w, eps_SF, "lower") + fluctuate(obs.n_w0, eps_SF, "lower")
    n_v = fluctuate(obs.n_0v, eps_SF, "upper") + fluctuate(obs.n_v0, eps_SF, "upper")
    n_0 = fluctuate(obs.n_00, eps_SF, "upper")
    bracket = (v * v * math.exp(w) * n_w / P["0w"]
               - w * w * math.exp(v) * n_v / P["0v"]
               - 2.0 * (v * v - w * w) * n_0 / P["00"])
    n_X1 = tau / (2.0 * w * v * (v - w)) * bracket

    m_v = fluctuate(obs.m_vv, eps_SF, "upper")
    m_w = fluctuate(obs.m_ww, eps_SF, "lower")
    Pv, Pw = obs.P_aa_slice["v"], obs.P_aa_slice["w"]
    if error_form == "corrected":
        m_X1 = tau / (v - w) * (math.exp(v) * m_v / Pv - math.exp(w) * m_w / Pw)
    elif error_form == "printed":
        m_X1 = tau / (v - w) * (math.exp(v) * m_v / Pv - math.exp(v) * m_w / Pw)
    elif error_form == "photon-number":
        m_X1 = tau / (2.0 * (v - w)) * (math.exp(2 * v) * m_v / Pv - math.exp(2 * w) * m_w / Pw)
    else:
        raise ValueError(f"error_form must be one of {ERROR_FORMS}, got {error_form!r}")
    if m_X1 < 0:
        notes.append("m_X1_upper clamped at 0")
        m_X1 = 0.0

    if n_X1 <= 0:
        raise EstimationFailure("decoy lower bound on single-photon counts is not positive")
    e_X1 = m_X1 / n_X1
    if e_X1 > 0.5:
        notes.append("e_X1_upper clamped at 0.5")
        e_X1 = 0.5
    return XWindowBounds(n_X1, m_X1, e_X1, tau, notes)


def population_bounds(proto: ProtocolParams, eps_SF: float) -> tuple[float, float]:
    """Lower bound on Z-window and upper bound on X-window single-photon preparations."""
    N = proto.N
    N_Z = proto.p_Z ** 2 * N
    u = proto.u
    N_Z1 = 2.0 * proto.p_s * (1.0 - proto.p_s) * u * math.exp(-u) * N_Z - hoeffding_delta(N_Z, eps_SF)
    N_X1 = 0.0
    for a in INTENSITY_LABELS:
        for b in INTENSITY_LABELS:
            s = proto.intensity(a) + proto.intensity(b)
            N_ab = proto.combination_prob(a, b) * N
            N_X1 += s * math.exp(-s) * N_ab + hoeffding_delta(N_ab, eps_SF)
    return max(N_Z1, 0.0), N_X1


def z_single_photon_bounds(xb: XWindowBounds, pops: tuple[float, float], eps_SF: float) -> ZWindowBounds:
    N_Z1, N_X1 = pops
    if N_X1 <= 0 or xb.n_X1_lower <= 0:
        raise EstimationFailure("no single-photon population to sample from")
    notes = []
    n_Z1 = xb.n_X1_lower * N_Z1 / N_X1 - serfling_upsilon(N_Z1, N_X1, eps_SF)
    if n_Z1 <= 0:
        raise EstimationFailure("Z-window single-photon lower bound is not positive")
    m_Z1 = xb.m_X1_upper * n_Z1 / xb.n_X1_lower + serfling_upsilon(n_Z1, xb.n_X1_lower, eps_SF)
    e_Z1 = m_Z1 / n_Z1
    if e_Z1 > 0.5:
        notes.append("e_Z1_upper clamped at 0.5")
        e_Z1 = 0.5
    return ZWindowBounds(N_Z1, N_X1, n_Z1, m_Z1, e_Z1, notes)


def block_bounds(zb: ZWindowBounds, n_Z: float, L: float, eps_SF: float) -> BlockBounds:
    """Single-photon bounds on one kept half (length L/2) drawn from the n_Z sifted bits."""
    half = L / 2.0
    if half > n_Z:
        raise ValueError("block too large: L/2 exceeds the sifted key size")
    eps_n = N_FLUCTUATIONS_COUNT_BOUND * eps_SF
    eps_e = N_FLUCTUATIONS_ERROR_BOUND * eps_SF
    if half == 0:
        return BlockBounds(0.0, 0.5, eps_n, eps_e, ["empty block"])
    notes = []
    n_Z1 = min(zb.n_Z1_lower, n_Z)
    n_L1 = n_Z1 * half / n_Z - serfling_lambda(n_Z, half, eps_SF)
    if n_L1 <= 0:
        return BlockBounds(0.0, 0.5, eps_n, eps_e, ["n_L1_lower clamped at 0"])
    if n_L1 > half:
        notes.append("n_L1_lower clamped at L/2")
        n_L1 = half
    e_L1 = zb.e_Z1_upper + serfling_lambda(n_Z1, min(n_L1, n_Z1), eps_SF) / n_L1
    if e_L1 > 0.5:
        notes.append("e_L1_upper clamped at 0.5")
        e_L1 = 0.5
    return BlockBounds(n_L1, e_L1, eps_n, eps_e, notes)


def keep_half_error_bound(E_test: float, L: float, n_test: float, eps_PE: float) -> float:
    """Upper bound on the kept-half error rate extrapolated from the test sample, capped at 0.5."""
    if n_test <= 0:
        raise ValueError("n_test must be positive")
    if L < 2:
        raise ValueError("L must be at least 2")
    half = L / 2.0
    dev = (2.0 / L) * math.sqrt((half + 1.0) * (half + n_test) * math.log(1.0 / eps_PE) / (2.0 * n_test))
    return min(E_test + dev, 0.5)


@dataclass
class EstimationContext:
    """L-independent part of the chain, computed once per parameter point."""

    xb: XWindowBounds
    zb: ZWindowBounds
    n_Z: float
    eps_SF: float

    def block(self, L: float) -> BlockBounds:
        return block_bounds(self.zb, self.n_Z, L, self.eps_SF)


def estimation_context(obs: ChannelObservables, proto: ProtocolParams, eps_SF: float,
                       error_form: str = "corrected") -> EstimationContext:
    xb = decoy_bounds_x(obs, proto, eps_SF, error_form=error_form)
    zb = z_single_photon_bounds(xb, population_bounds(proto, eps_SF), eps_SF)
    return EstimationContext(xb, zb, obs.n_Z, eps_SF)
