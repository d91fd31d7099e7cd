"""Expected-value (linear) model of the twin-field key generation observables.

Symmetric setup: Alice and Bob each sit half the total distance away from the
measuring station. X windows carry intensities {0, w, v}; Z windows send ``u``
with probability ``p_s`` and vacuum otherwise.

Per-event one-detector click probabilities are written in the form
``(1 - P) * exp(-y) * (expm1(...) + P)`` to avoid cancellation at long
distances, where they drop to ~1e-6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

INTENSITY_LABELS = ("0", "w", "v")
SLICE_RTOL = 1e-10
RING_SERIES_MAX = 10.0


@dataclass(frozen=True)
class SystemParams:
    alpha_db_per_km: float = 0.2
    eta_d: float = 0.5
    p_dc: float = 1e-7
    e_d: float = 0.03
    distance_km: float = 0.0

    def __post_init__(self):
        if self.alpha_db_per_km < 0:
            raise ValueError("alpha_db_per_km must be nonnegative")
        if self.distance_km < 0:
            raise ValueError("distance_km must be nonnegative")
        if not 0.0 <= self.eta_d <= 1.0:
            raise ValueError("eta_d must lie in [0, 1]")
        if not 0.0 <= self.p_dc <= 1.0:
            raise ValueError("p_dc must lie in [0, 1]")
        if not 0.0 <= self.e_d <= 0.5:
            raise ValueError("e_d must lie in [0, 0.5]")


@dataclass(frozen=True)
class ProtocolParams:
    """Tunable protocol knobs.

    ``p_0 = 1 - p_w - p_v - p_Z`` is the vacuum probability on X windows.
    """

    w: float
    v: float
    u: float
    p_w: float
    p_v: float
    p_Z: float
    p_s: float
    M: int = 16
    N: float = 1e13
    r_ET: float = 0.055

    def __post_init__(self):
        if not 0.0 < self.w < self.v:
            raise ValueError("decoy intensities must satisfy 0 < w < v")
        if self.u <= 0:
            raise ValueError("signal intensity u must be positive")
        for name in ("p_w", "p_v", "p_Z", "p_s", "r_ET"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
        if self.p_w + self.p_v + self.p_Z > 1.0 + 1e-12:
            raise ValueError("window probabilities violate the simplex: p_w + p_v + p_Z must be <= 1")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError("M must be an integer >= 2")
        if self.N <= 0:
            raise ValueError("N must be positive")

    @property
    def p_0(self) -> float:
        return max(1.0 - self.p_w - self.p_v - self.p_Z, 0.0)

    @property
    def delta(self) -> float:
        return 2.0 * math.pi / self.M

    def intensity(self, label: str) -> float:
        return {"0": 0.0, "w": self.w, "v": self.v}[label]

    def choice_prob(self, label: str) -> float:
        return {"0": self.p_0, "w": self.p_w, "v": self.p_v}[label]

    def combination_prob(self, a: str, b: str) -> float:
        return self.choice_prob(a) * self.choice_prob(b)

    def effective_prob(self, a: str) -> float:
        """Probability of an effective event (equal intensities, matched phase slice)."""
        return 2.0 * self.choice_prob(a) ** 2 * self.delta / (2.0 * math.pi)

    def as_vector(self) -> np.ndarray:
        return np.array([self.w, self.v, self.u, self.p_Z, self.p_s, self.p_w, self.p_v])


@dataclass
class ChannelObservables:
    n_00: float
    n_0w: float
    n_w0: float
    n_0v: float
    n_v0: float
    m_ww: float
    m_vv: float
    n_Z: float
    E_Z: float
    N_ab: dict = field(default_factory=dict)
    N_Z: float = 0.0
    P_ab: dict = field(default_factory=dict)
    P_aa_slice: dict = field(default_factory=dict)
    # Z-window clicks split by sending pattern: neither, exactly one, both.
    T_00: float = 0.0
    T_0u: float = 0.0
    T_uu: float = 0.0


def arm_transmittance(sys: SystemParams) -> float:
    """Per-arm transmittance including detector efficiency.

    Each arm spans half of ``distance_km``, hence the /20 exponent.
    """
    return sys.eta_d * 10.0 ** (-sys.alpha_db_per_km * sys.distance_km / 20.0)


def _trig2(theta, kind):
    if kind == "sin2":
        return np.sin(theta / 2.0) ** 2
    if kind == "cos2":
        return np.cos(theta / 2.0) ** 2
    raise ValueError(f"kind must be 'sin2' or 'cos2', got {kind!r}")


def slice_integral(intensity: float, eta: float, delta: float, kind: str) -> float:
    """Phase-slice average (1/delta) * int_{-delta/2}^{delta/2} exp(-2 eta x trig^2(t/2)) dt."""
    if not 0.0 < delta <= 2.0 * math.pi:
        raise ValueError("delta must lie in (0, 2*pi]")
    _trig2(0.0, kind)
    if intensity == 0.0 or eta == 0.0:
        return 1.0
    a = 2.0 * eta * intensity
    value, _ = integrate.quad(
        lambda t: math.exp(-a * _trig2(t, kind)),
        -delta / 2.0, delta / 2.0, epsabs=0.0, epsrel=SLICE_RTOL, limit=200,
    )
    return value / delta


def _slice_expm1_mean(a: float, delta: float) -> float:
    """(1/delta) * int expm1(a sin^2(t/2)) dt over the slice, for small a without cancellation."""
    if a == 0.0:
        return 0.0
    value, _ = integrate.quad(
        lambda t: math.expm1(a * math.sin(t / 2.0) ** 2),
        -delta / 2.0, delta / 2.0, epsabs=0.0, epsrel=SLICE_RTOL, limit=200,
    )
    return value / delta


def ring_integral(z: float) -> float:
    """(1/2pi) * int_0^{2pi} exp(z cos t) dt, i.e. the modified Bessel function I0.

    Power series sum_k (z^2/4)^k / (k!)^2 below z = 10, where every term is
    positive so the result is exactly >= 1 and monotone; scipy's I0 above.
    """
    if z < 0:
        raise ValueError("z must be nonnegative")
    if z >= RING_SERIES_MAX:
        return float(special.i0(z))
    q = 0.25 * z * z
    term, total, k = 1.0, 1.0, 0
    while term > 1e-17 * total:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def single_side_click_prob(x: float, eta: float, p_dc: float) -> float:
    """One-detector click probability when one side sends intensity x and the other vacuum."""
    y = eta * x
    return 2.0 * (1.0 - p_dc) * math.exp(-y) * (math.expm1(y / 2.0) + p_dc)


def both_send_click_prob(x: float, eta: float, p_dc: float) -> float:
    """One-detector click probability when both sides send x with independent random phases."""
    y = eta * x
    # exp(y) I0(y) - 1 written via the scaled Bessel function i0e(y) = exp(-y) I0(y).
    e2_i0_minus_1 = math.expm1(2.0 * y) * float(special.i0e(y)) + float(special.i0e(y)) - 1.0
    return 2.0 * (1.0 - p_dc) * math.exp(-2.0 * y) * (e2_i0_minus_1 + p_dc)


def wrong_click_prob(x: float, eta: float, p_dc: float, e_d: float, delta: float) -> float:
    """Wrong-click probability of an effective event with both sides at intensity x.

    The misaligned fraction ``e_d`` clicks on the sin^2 port, the rest on the
    cos^2 port.
    """
    a = 2.0 * eta * x
    ea = math.exp(-a)
    # (1-P) <exp(-a sin^2)> - (1-P)^2 exp(-a)
    sin_term = (1.0 - p_dc) * (slice_integral(x, eta, delta, "sin2") - (1.0 - p_dc) * ea)
    # (1-P) <exp(-a cos^2)> - (1-P)^2 exp(-a) = (1-P) exp(-a) (<expm1(a sin^2)> + P)
    cos_term = (1.0 - p_dc) * ea * (_slice_expm1_mean(a, delta) + p_dc)
    return e_d * sin_term + (1.0 - e_d) * cos_term


def z_window_terms(sys: SystemParams, proto: ProtocolParams) -> tuple[float, float, float]:
    """Expected Z-window one-detector clicks split into (neither, one, both) sending."""
    eta = arm_transmittance(sys)
    P = sys.p_dc
    N_Z = proto.p_Z ** 2 * proto.N
    ps = proto.p_s
    t00 = (1.0 - ps) ** 2 * 2.0 * P * (1.0 - P) * N_Z
    t0u = 2.0 * ps * (1.0 - ps) * single_side_click_prob(proto.u, eta, P) * N_Z
    tuu = ps ** 2 * both_send_click_prob(proto.u, eta, P) * N_Z
    return t00, t0u, tuu


def z_window_error_rate(sys: SystemParams, proto: ProtocolParams) -> float:
    """Z-window bit error rate: clicks where both or neither side sent are errors.

    Capped at 0.5; higher rates only occur when dark counts swamp the signal.
    """
    t00, t0u, tuu = z_window_terms(sys, proto)
    total = t00 + t0u + tuu
    if total <= 0.0:
        return 0.5
    return min((t00 + tuu) / total, 0.5)


def expected_observables(sys: SystemParams, proto: ProtocolParams) -> ChannelObservables:
    eta = arm_transmittance(sys)
    P = sys.p_dc
    N = proto.N
    N_ab = {}
    P_ab = {}
    for a in INTENSITY_LABELS:
        for b in INTENSITY_LABELS:
            P_ab[a + b] = proto.combination_prob(a, b)
            N_ab[a + b] = P_ab[a + b] * N
    P_slice = {a: proto.effective_prob(a) for a in ("w", "v")}

    n_00 = 2.0 * P * (1.0 - P) * N_ab["00"]
    n_0w = single_side_click_prob(proto.w, eta, P) * N_ab["0w"]
    n_0v = single_side_click_prob(proto.v, eta, P) * N_ab["0v"]
    m_ww = wrong_click_prob(proto.w, eta, P, sys.e_d, proto.delta) * P_slice["w"] * N
    m_vv = wrong_click_prob(proto.v, eta, P, sys.e_d, proto.delta) * P_slice["v"] * N

    t00, t0u, tuu = z_window_terms(sys, proto)
    n_Z = t00 + t0u + tuu
    E_Z = min((t00 + tuu) / n_Z, 0.5) if n_Z > 0 else 0.5
    return ChannelObservables(
        n_00=n_00, n_0w=n_0w, n_w0=n_0w, n_0v=n_0v, n_v0=n_0v,
        m_ww=m_ww, m_vv=m_vv, n_Z=n_Z, E_Z=E_Z,
        N_ab=N_ab, N_Z=proto.p_Z ** 2 * N, P_ab=P_ab, P_aa_slice=P_slice,
        T_00=t00, T_0u=t0u, T_uu=tuu,
    )


def single_photon_click_prob(eta: float, p_dc: float) -> float:
    """One-detector click probability for a single photon entering one arm.

    Lost with probability 1 - eta (then only a lone dark count heralds);
    otherwise it reaches one detector, which clicks, and the other must stay dark.
    """
    return (1.0 - eta) * 2.0 * p_dc * (1.0 - p_dc) + eta * (1.0 - p_dc)


def single_photon_wrong_click_prob(eta: float, p_dc: float, e_d: float, delta: float) -> float:
    """Wrong-click probability of a single photon in an effective event."""
    mean_sin2 = 0.5 - math.sin(delta / 2.0) / delta
    mean_cos2 = 1.0 - mean_sin2
    wrong_port = e_d * mean_cos2 + (1.0 - e_d) * mean_sin2
    return (1.0 - eta) * p_dc * (1.0 - p_dc) + eta * (1.0 - p_dc) * wrong_port


def true_single_photon_oracle(sys: SystemParams, proto: ProtocolParams) -> tuple[float, float]:
    """Exact expected single-photon Z-window clicks and their phase-error rate.

    Returns ``(n_Z1, e_Z1)`` under the same linear model that generates the
    observables. These are the quantities the finite-size chain must bound.
    """
    eta = arm_transmittance(sys)
    P = sys.p_dc
    N_Z = proto.p_Z ** 2 * proto.N
    population = 2.0 * proto.p_s * (1.0 - proto.p_s) * proto.u * math.exp(-proto.u) * N_Z
    s1 = single_photon_click_prob(eta, P)
    e1 = single_photon_wrong_click_prob(eta, P, sys.e_d, proto.delta) / s1 if s1 > 0 else 0.5
    return population * s1, e1
