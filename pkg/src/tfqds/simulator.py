"""Monte Carlo realization of the distribution and messaging stages.

Counts are sampled per category (intensity pair or Z-window sending pattern)
rather than per pulse, so runs at N ~ 1e13 stay cheap. Key strings are only
materialized for the messaging stage, where the sifted key has to fit in
memory.

Every trial-level routine derives the generator for trial ``i`` from
``(seed, i)``, so results do not depend on how trials are batched or ordered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .channel import (
    ChannelObservables,
    ProtocolParams,
    SystemParams,
    arm_transmittance,
    expected_observables,
    wrong_click_prob,
)
from .mathcore import SecurityBudget
from .pipeline import signature_report
from .security import p_repudiation

MAX_POPULATION = 2 ** 62
MAX_KEY_BITS = 2 ** 24
PAIRS = ("AB", "AC")


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


@dataclass
class CategoryDraw:
    population: int
    prob: float
    count: int


@dataclass
class SampledRun:
    """Sampled observables for the Alice-Bob and Alice-Charlie links."""

    observables: dict
    seed: int
    draws: dict = field(default_factory=dict)


def _population(x: float, name: str) -> int:
    if not x < MAX_POPULATION:
        raise OverflowError(f"population of category {name} ({x:.3g}) does not fit in 64-bit integers")
    return int(round(x))


def _draw(rng: np.random.Generator, population: int, prob: float) -> int:
    prob = min(max(prob, 0.0), 1.0)
    if population == 0 or prob == 0.0:
        return 0
    if prob == 1.0:
        return population
    return int(rng.binomial(population, prob))


@dataclass
class CategoryTable:
    """Per-category populations and per-event probabilities of one parameter point."""

    expected: ChannelObservables
    clicks: dict
    error_fraction: dict


X_CATEGORIES = (("X_00", "00", "n_00"), ("X_0w", "0w", "n_0w"), ("X_w0", "w0", "n_w0"),
                ("X_0v", "0v", "n_0v"), ("X_v0", "v0", "n_v0"))


def category_table(sys: SystemParams, proto: ProtocolParams) -> CategoryTable:
    exp = expected_observables(sys, proto)
    clicks = {}
    for name, key, attr in X_CATEGORIES:
        pop = exp.N_ab[key]
        clicks[name] = (pop, getattr(exp, attr) / pop if pop > 0 else 0.0)
    # Effective events: clicks on either port, then wrong clicks among them.
    eta = arm_transmittance(sys)
    error_fraction = {}
    for a in ("w", "v"):
        x = proto.intensity(a)
        wrong = wrong_click_prob(x, eta, sys.p_dc, sys.e_d, proto.delta)
        right = wrong_click_prob(x, eta, sys.p_dc, 1.0 - sys.e_d, proto.delta)
        clicks[f"eff_{a}{a}"] = (exp.P_aa_slice[a] * proto.N, wrong + right)
        error_fraction[f"err_{a}{a}"] = wrong / (wrong + right) if wrong + right > 0 else 0.0
    ps = proto.p_s
    for name, pop, count in (("Z_00", (1.0 - ps) ** 2 * exp.N_Z, exp.T_00),
                             ("Z_0u", 2.0 * ps * (1.0 - ps) * exp.N_Z, exp.T_0u),
                             ("Z_uu", ps ** 2 * exp.N_Z, exp.T_uu)):
        clicks[name] = (pop, count / pop if pop > 0 else 0.0)
    return CategoryTable(exp, clicks, error_fraction)


def _sample_link(table: CategoryTable, rng: np.random.Generator):
    draws: dict = {}
    for name, (population, prob) in table.clicks.items():
        pop = _population(population, name)
        draws[name] = CategoryDraw(pop, prob, _draw(rng, pop, prob))
    for a in ("w", "v"):
        clicks = draws[f"eff_{a}{a}"].count
        prob = table.error_fraction[f"err_{a}{a}"]
        draws[f"err_{a}{a}"] = CategoryDraw(clicks, prob, _draw(rng, clicks, prob))

    exp = table.expected
    t00, t0u, tuu = (draws[k].count for k in ("Z_00", "Z_0u", "Z_uu"))
    n_Z = t00 + t0u + tuu
    x = {attr: draws[name].count for name, _, attr in X_CATEGORIES}
    obs = ChannelObservables(
        **x, m_ww=draws["err_ww"].count, m_vv=draws["err_vv"].count,
        n_Z=n_Z, E_Z=(t00 + tuu) / n_Z if n_Z > 0 else 0.5,
        N_ab=exp.N_ab, N_Z=exp.N_Z, P_ab=exp.P_ab, P_aa_slice=exp.P_aa_slice,
        T_00=t00, T_0u=t0u, T_uu=tuu,
    )
    return obs, draws


def sample_observables(sys: SystemParams, proto: ProtocolParams, seed: int,
                       table: CategoryTable | None = None) -> SampledRun:
    """Binomial draws around the linear-model expectations, one link at a time.

    Both links share the channel parameters (symmetric recipients) but are
    sampled independently. ``table`` skips recomputing the category
    probabilities when sampling the same point repeatedly.
    """
    table = table or category_table(sys, proto)
    observables, draws = {}, {}
    for i, pair in enumerate(PAIRS):
        observables[pair], draws[pair] = _sample_link(table, trial_rng(seed, i))
    return SampledRun(observables, seed, draws)


@dataclass
class PairKey:
    """Sifted strings of one Alice-recipient link and the test-set mask."""

    alice: np.ndarray
    recipient: np.ndarray
    test_mask: np.ndarray

    @property
    def n_Z(self) -> int:
        return self.alice.size

    @property
    def test_error_rate(self) -> float:
        n = int(self.test_mask.sum())
        if n == 0:
            return math.nan
        return float(np.count_nonzero(self.alice[self.test_mask] != self.recipient[self.test_mask])) / n

    @property
    def pool_alice(self) -> np.ndarray:
        return self.alice[~self.test_mask]

    @property
    def pool_recipient(self) -> np.ndarray:
        return self.recipient[~self.test_mask]

    @property
    def pool_size(self) -> int:
        return self.n_Z - int(self.test_mask.sum())


@dataclass
class KeyPool:
    pairs: dict
    notes: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return any(p.pool_size == 0 for p in self.pairs.values())


def _pair_key(n_Z: int, n_err: int, r_ET: float, rng: np.random.Generator) -> PairKey:
    alice = rng.integers(0, 2, size=n_Z, dtype=np.uint8)
    recipient = alice.copy()
    errors = rng.choice(n_Z, size=n_err, replace=False)
    recipient[errors] ^= 1
    mask = np.zeros(n_Z, dtype=bool)
    mask[rng.choice(n_Z, size=int(round(r_ET * n_Z)), replace=False)] = True
    return PairKey(alice, recipient, mask)


def build_key_pools(run: SampledRun, proto: ProtocolParams, r_ET: float | None = None,
                    max_bits: int = MAX_KEY_BITS) -> KeyPool:
    """Synthesize sifted strings with exactly the sampled number of errors.

    ``r_ET`` overrides the protocol's test fraction (it may be 1 here, which
    leaves an empty pool).
    """
    r_ET = proto.r_ET if r_ET is None else r_ET
    if not 0.0 <= r_ET <= 1.0:
        raise ValueError("r_ET must lie in [0, 1]")
    pairs, notes = {}, []
    for i, pair in enumerate(PAIRS):
        obs = run.observables[pair]
        n_Z = int(obs.n_Z)
        if n_Z == 0:
            raise ValueError(f"empty sift on link {pair}")
        if n_Z > max_bits:
            raise ValueError(f"sifted key of {n_Z} bits exceeds max_bits={max_bits}; lower N")
        n_err = int(obs.T_00 + obs.T_uu)
        pairs[pair] = _pair_key(n_Z, n_err, r_ET, trial_rng(run.seed, len(PAIRS) + i))
        if pairs[pair].pool_size == 0:
            notes.append(f"empty pool on link {pair}")
    return KeyPool(pairs, notes)


@dataclass
class SignatureTranscript:
    m: int
    signature: tuple
    B_keep: np.ndarray
    B_forward: np.ndarray
    C_keep: np.ndarray
    C_forward: np.ndarray
    mismatches: dict
    bob_accepts: bool
    charlie_accepts: bool


def _accepts(counts, s: float, L: int) -> bool:
    # Strict inequality against the real-valued threshold s L/2.
    return all(c < s * L / 2.0 for c in counts)


def sign_and_verify(pools: KeyPool, m: int, L: int, s_a: float, s_v: float, seed: int) -> SignatureTranscript:
    """Sign one bit with length-L blocks, symmetrize, and run both verifications.

    Message ``m`` uses pool block ``[m L, (m+1) L)`` on each link. Bob and
    Charlie each forward a random half of their block to the other.
    """
    if m not in (0, 1):
        raise ValueError("message must be 0 or 1")
    if L < 2 or L % 2:
        raise ValueError("L must be a positive even integer")
    for pair in PAIRS:
        if 2 * L > pools.pairs[pair].pool_size:
            raise ValueError(f"pool exhausted on link {pair}: need {2 * L} bits")
    block = slice(m * L, (m + 1) * L)
    AB, AC = pools.pairs["AB"], pools.pairs["AC"]
    sig_B, bob = AB.pool_alice[block], AB.pool_recipient[block]
    sig_C, charlie = AC.pool_alice[block], AC.pool_recipient[block]

    rng = np.random.default_rng(seed)
    half = L // 2
    perm_B, perm_C = rng.permutation(L), rng.permutation(L)
    B_keep, B_forward = np.sort(perm_B[:half]), np.sort(perm_B[half:])
    C_keep, C_forward = np.sort(perm_C[:half]), np.sort(perm_C[half:])

    def miss(sig, key, idx):
        return int(np.count_nonzero(sig[idx] != key[idx]))

    mismatches = {
        "B_keep": miss(sig_B, bob, B_keep),
        "C_forward": miss(sig_C, charlie, C_forward),
        "C_keep": miss(sig_C, charlie, C_keep),
        "B_forward": miss(sig_B, bob, B_forward),
    }
    bob_ok = _accepts((mismatches["B_keep"], mismatches["C_forward"]), s_a, L)
    charlie_ok = _accepts((mismatches["C_keep"], mismatches["B_forward"]), s_v, L)
    return SignatureTranscript(m, (sig_B, sig_C), B_keep, B_forward, C_keep, C_forward,
                               mismatches, bob_ok, charlie_ok)


@dataclass
class AdversaryResult:
    successes: int
    trials: int
    rate: float
    ci_low: float
    ci_high: float
    reference: float
    vacuous: bool = False
    notes: list = field(default_factory=list)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def to_dict(self) -> dict:
        return {"successes": self.successes, "trials": self.trials, "rate": self.rate,
                "ci_low": self.ci_low, "ci_high": self.ci_high, "reference": self.reference,
                "vacuous": self.vacuous, "notes": list(self.notes)}


def _result(successes: int, trials: int, reference: float, confidence: float) -> AdversaryResult:
    if trials < 1:
        raise ValueError("trials must be positive")
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return AdversaryResult(successes, trials, successes / trials, float(ci.low), float(ci.high), reference)


def adversary_repudiation(trials: int, L: int, s_a: float, s_v: float, seed: int,
                          rate: float | None = None, confidence: float = 0.95) -> AdversaryResult:
    """Alice injects i.i.d. mismatches into both recipients' blocks and hopes
    Bob accepts while Charlie rejects.

    The default injection rate is the midpoint (s_a + s_v)/2. With i.i.d.
    mismatches, the count landing in a random half is hypergeometric given the
    block total, which is what is drawn here.
    """
    if not s_a < s_v:
        raise ValueError("thresholds must satisfy s_a < s_v")
    if L < 2 or L % 2:
        raise ValueError("L must be a positive even integer")
    rate = 0.5 * (s_a + s_v) if rate is None else rate
    half = L // 2
    wins = 0
    for i in range(trials):
        rng = trial_rng(seed, i)
        K_B, K_C = rng.binomial(L, rate, size=2)
        B_keep = rng.hypergeometric(K_B, L - K_B, half) if K_B else 0
        C_keep = rng.hypergeometric(K_C, L - K_C, half) if K_C else 0
        bob = _accepts((B_keep, K_C - C_keep), s_a, L)
        charlie = _accepts((C_keep, K_B - B_keep), s_v, L)
        wins += bool(bob and not charlie)
    bound = p_repudiation(s_a, s_v, L)
    res = _result(wins, trials, bound, confidence)
    if bound >= 1.0:
        res.vacuous = True
        res.notes.append("repudiation bound >= 1 at this L; comparison is vacuous")
    return res


def forge_success_exact(L: int, s_v: float, p_guess: float = 0.5) -> float:
    """P[Bin(L/2, 1 - p_guess) < s_v L/2]."""
    half = L // 2
    threshold = s_v * L / 2.0
    k = math.ceil(threshold) - 1
    if k < 0:
        return 0.0
    return float(stats.binom.cdf(min(k, half), half, 1.0 - p_guess))


def adversary_forge(trials: int, L: int, s_v: float, seed: int, p_guess: float = 0.5,
                    confidence: float = 0.95) -> AdversaryResult:
    """Bob guesses each of Charlie's L/2 kept bits, correct with probability
    ``p_guess``; he wins if his mismatches stay below s_v L/2.

    The reference is the exact binomial tail.
    """
    if not 0.0 <= p_guess <= 1.0:
        raise ValueError("p_guess must lie in [0, 1]")
    if L < 2 or L % 2:
        raise ValueError("L must be a positive even integer")
    half = L // 2
    wins = 0
    for i in range(trials):
        wrong = trial_rng(seed, i).random(half) >= p_guess
        wins += _accepts((int(wrong.sum()),), s_v, L)
    return _result(wins, trials, forge_success_exact(L, s_v, p_guess), confidence)


@dataclass
class SimulationSummary:
    N_analysis: float
    N_sim: float
    L: int
    s_a: float
    s_v: float
    trials: int
    bob_accept_rate: float
    charlie_accept_rate: float
    honest_reject_rate: float
    P_robust: float
    mean_test_error: float
    E_Z: float
    repudiation: AdversaryResult
    forging: AdversaryResult
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "N_analysis", "N_sim", "L", "s_a", "s_v", "trials", "bob_accept_rate",
            "charlie_accept_rate", "honest_reject_rate", "P_robust", "mean_test_error", "E_Z")}
        out["repudiation"] = self.repudiation.to_dict()
        out["forging"] = self.forging.to_dict()
        out["notes"] = list(self.notes)
        return out


def simulate(sys: SystemParams, proto: ProtocolParams, budget: SecurityBudget, trials: int,
             seed: int = 0, adversary_trials: int = 10000, p_guess: float = 0.5,
             pool_margin: float = 4.0, error_form: str = "corrected") -> SimulationSummary:
    """Honest signing trials plus both scripted adversaries at the analytic operating point.

    L, s_a and s_v come from the analytic report at ``proto``. Honest runs use
    a reduced pulse count N_sim chosen so the expected pool holds about
    ``pool_margin * L`` bits; error rates are intensive, so acceptance
    statistics carry over to the full N.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    report = signature_report(sys, proto, budget, error_form=error_form)
    if not report.feasible:
        raise ValueError("infeasible: no signature length meets the security target at this point")
    L, s_a, s_v = report.L, report.s_a, report.s_v
    exp = expected_observables(sys, proto)
    N_sim = min(proto.N, proto.N * pool_margin * L / (report.n_pool / 2.0))
    sim_proto = replace(proto, N=N_sim)
    table = category_table(sys, sim_proto)

    bob = charlie = 0
    test_errors = []
    for i in range(trials):
        run = sample_observables(sys, sim_proto, int(trial_rng(seed, i).integers(2 ** 63)), table)
        pools = build_key_pools(run, sim_proto)
        test_errors.extend(p.test_error_rate for p in pools.pairs.values())
        tr = sign_and_verify(pools, i % 2, L, s_a, s_v, seed=int(trial_rng(seed, trials + i).integers(2 ** 63)))
        bob += tr.bob_accepts
        charlie += tr.charlie_accepts
    rep = adversary_repudiation(adversary_trials, L, s_a, s_v, seed=seed + 1)
    forge = adversary_forge(adversary_trials, L, s_v, seed=seed + 2, p_guess=p_guess)
    return SimulationSummary(
        N_analysis=proto.N, N_sim=N_sim, L=L, s_a=s_a, s_v=s_v, trials=trials,
        bob_accept_rate=bob / trials, charlie_accept_rate=charlie / trials,
        honest_reject_rate=1.0 - bob / trials, P_robust=report.P_robust,
        mean_test_error=float(np.mean(test_errors)), E_Z=exp.E_Z,
        repudiation=rep, forging=forge, notes=list(report.diagnostics),
    )


__all__ = [
    "AdversaryResult", "CategoryDraw", "CategoryTable", "category_table", "KeyPool", "PairKey", "SampledRun", "SignatureTranscript",
    "SimulationSummary", "adversary_forge", "adversary_repudiation", "build_key_pools",
    "forge_success_exact", "sample_observables", "sign_and_verify", "simulate", "trial_rng",
]
