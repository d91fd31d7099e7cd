"""Signature-rate optimization over the seven free protocol parameters, and sweeps.

The search runs in log-space: each coordinate moves multiplicatively, which
suits parameters spanning several decades (intensities near 1e-2 next to
window probabilities near 0.9). Infeasible points have objective 0, so the
search itself ranks them by how close the whole key pool comes to the
security target; that keeps the descent moving across infeasible plateaus.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .channel import ProtocolParams, SystemParams
from .mathcore import SecurityBudget
from .pipeline import signature_report
from .security import SignatureReport

log = logging.getLogger(__name__)

PARAM_NAMES = ("w", "v", "u", "p_Z", "p_s", "p_w", "p_v")
W_V_MARGIN = 1e-6
P0_FLOOR = 1e-4
# Always-refined reference start; lies in the feasible region across the
# default system parameters from 0 to ~300 km.
REFERENCE_START = {"w": 0.01, "v": 0.08, "u": 0.3, "p_Z": 0.75, "p_s": 0.04, "p_w": 0.07, "p_v": 0.14}
INITIAL_STEP = 0.5
MIN_STEP = 1e-3


@dataclass
class SearchSpace:
    bounds: dict = field(default_factory=lambda: {
        "w": (1e-4, 1.0), "v": (1e-4, 1.0), "u": (1e-4, 1.0),
        "p_Z": (1e-4, 0.999), "p_s": (1e-4, 0.999),
        "p_w": (1e-4, 0.999), "p_v": (1e-4, 0.999),
    })

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi = self.bounds[name]
            if not 0 < lo <= hi:
                raise ValueError(f"bounds for {name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
        if self.bounds["w"][0] + W_V_MARGIN > self.bounds["v"][1]:
            raise ValueError("search space cannot satisfy w < v")
        if self.bounds["p_w"][0] + self.bounds["p_v"][0] + self.bounds["p_Z"][0] > 1.0 - P0_FLOOR:
            raise ValueError("search space cannot satisfy p_w + p_v + p_Z <= 1")

    @property
    def log_lo(self) -> np.ndarray:
        return np.log([self.bounds[n][0] for n in PARAM_NAMES])

    @property
    def log_hi(self) -> np.ndarray:
        return np.log([self.bounds[n][1] for n in PARAM_NAMES])

    def project(self, x: np.ndarray) -> np.ndarray:
        """Clip to the box, then enforce w < v and the window-probability simplex."""
        y = np.exp(np.clip(x, self.log_lo, self.log_hi))
        w, v, u, pZ, ps, pw, pv = y
        if w > v - W_V_MARGIN:
            if v - W_V_MARGIN >= self.bounds["w"][0]:
                w = v - W_V_MARGIN
            else:
                v = w + W_V_MARGIN
        total = pZ + pw + pv
        if total > 1.0 - P0_FLOOR:
            scale = (1.0 - P0_FLOOR) / total
            pZ, pw, pv = pZ * scale, pw * scale, pv * scale
        return np.log([w, v, u, pZ, ps, pw, pv])

    def contains(self, proto: ProtocolParams, tol: float = 1e-9) -> bool:
        for name in PARAM_NAMES:
            lo, hi = self.bounds[name]
            value = getattr(proto, name)
            if value < lo * (1 - tol) or value > hi * (1 + tol):
                return False
        return proto.w < proto.v and proto.p_w + proto.p_v + proto.p_Z <= 1.0 + tol


def _to_proto(x: np.ndarray, template: ProtocolParams | None, N: float) -> ProtocolParams:
    values = dict(zip(PARAM_NAMES, (float(t) for t in np.exp(x))))
    if template is None:
        return ProtocolParams(N=N, **values)
    return replace(template, **values)


def _from_proto(proto: ProtocolParams) -> np.ndarray:
    return np.log([getattr(proto, n) for n in PARAM_NAMES])


def objective(sys: SystemParams, proto: ProtocolParams, budget: SecurityBudget,
              error_form: str = "corrected") -> float:
    """Signature rate R at one point; 0 when infeasible."""
    return signature_report(sys, proto, budget, error_form=error_form).R


def search_score(report: SignatureReport, budget: SecurityBudget) -> float:
    """Ordering used by the optimizer: log R when feasible, else distance to the target."""
    if report.feasible and report.R > 0:
        return math.log(report.R)
    return -1e3 - math.log10(max(report.eps_at_max_L, 1e-300) / budget.eps_target)


@dataclass
class OptimizationResult:
    proto: ProtocolParams
    report: SignatureReport
    evaluations: int = 0
    trace: list = field(default_factory=list)


class _Evaluator:
    def __init__(self, sys, budget, space, template, N, error_form):
        self.sys, self.budget, self.space = sys, budget, space
        self.template, self.N, self.error_form = template, N, error_form
        self.count = 0
        self.cache = {}
        self.trace = []

    def __call__(self, x: np.ndarray) -> tuple[float, SignatureReport]:
        key = tuple(np.round(x, 12))
        if key in self.cache:
            return self.cache[key]
        proto = _to_proto(x, self.template, self.N)
        report = signature_report(self.sys, proto, self.budget, error_form=self.error_form)
        score = search_score(report, self.budget)
        self.count += 1
        self.cache[key] = (score, report)
        self.trace.append((self.count, *np.exp(x), report.R, report.feasible))
        return score, report


def coordinate_descent(evaluate, space: SearchSpace, x0: np.ndarray,
                       step: float = INITIAL_STEP, min_step: float = MIN_STEP):
    """Greedy +/- moves along each log-coordinate; halve the step when a sweep stalls.

    A successful move is extended along the same line with doubling steps
    while it keeps improving, so long valleys are crossed in a few evaluations.
    """
    x = space.project(x0)
    best, _ = evaluate(x)
    while step >= min_step:
        improved = False
        for i in range(len(x)):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[i] += sign * step
                trial = space.project(trial)
                if np.array_equal(trial, x):
                    continue
                score, _ = evaluate(trial)
                if score <= best:
                    continue
                x, best, improved = trial, score, True
                reach = 2.0 * step
                while True:
                    trial = x.copy()
                    trial[i] += sign * reach
                    trial = space.project(trial)
                    if np.array_equal(trial, x):
                        break
                    score, _ = evaluate(trial)
                    if score <= best:
                        break
                    x, best = trial, score
                    reach *= 2.0
                break
        if not improved:
            step *= 0.5
    return x, best


def optimize(sys: SystemParams, budget: SecurityBudget, space: SearchSpace | None = None,
             seed: int = 0, effort: int = 1, x0: ProtocolParams | None = None,
             template: ProtocolParams | None = None, N: float = 1e13,
             error_form: str = "corrected") -> OptimizationResult:
    """Multi-start coordinate descent for the signature rate.

    ``effort`` scales the number of Latin-hypercube starts (16 per unit) and
    refined starts (2 per unit). ``x0`` adds a warm start that is always
    refined. ``template`` supplies M, N and r_ET; without it ``N`` is used
    with default M and r_ET. Deterministic for a given seed.
    """
    space = space or SearchSpace()
    if template is not None:
        N = template.N
    elif x0 is not None:
        template = x0
        N = x0.N
    evaluate = _Evaluator(sys, budget, space, template, N, error_form)

    rng = np.random.default_rng(seed)
    n_samples = max(16 * effort, 1)
    sampler = qmc.LatinHypercube(d=len(PARAM_NAMES), seed=rng)
    cube = sampler.random(n_samples)
    starts = [space.project(space.log_lo + c * (space.log_hi - space.log_lo)) for c in cube]
    scored = sorted(((evaluate(x)[0], i) for i, x in enumerate(starts)), reverse=True)
    refine = [starts[i] for _, i in scored[: max(2 * effort, 1)]]
    refine.insert(0, space.project(np.log([REFERENCE_START[n] for n in PARAM_NAMES])))
    if x0 is not None:
        refine.insert(0, space.project(_from_proto(x0)))

    best_x, best_score = None, -math.inf
    for x in refine:
        xr, score = coordinate_descent(evaluate, space, x)
        if score > best_score:
            best_x, best_score = xr, score
    proto = _to_proto(best_x, template, N)
    _, report = evaluate(best_x)
    if not report.feasible:
        report.diagnostics.append("no feasible point found")
    log.debug("optimize: %d evaluations, R=%g", evaluate.count, report.R)
    return OptimizationResult(proto, report, evaluate.count, evaluate.trace)


@dataclass
class SweepSpec:
    variable: str
    grid: list
    sys: SystemParams = field(default_factory=SystemParams)
    optimize_per_point: bool = True
    proto: ProtocolParams | None = None

    def __post_init__(self):
        if self.variable not in ("distance_km", "e_d"):
            raise ValueError("swept variable must be 'distance_km' or 'e_d'")
        if len(self.grid) == 0 or any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("sweep grid must be nonempty and strictly increasing")
        if not self.optimize_per_point and self.proto is None:
            raise ValueError("a fixed protocol point is required when not optimizing")


@dataclass
class SweepRow:
    value: float
    proto: ProtocolParams | None
    report: SignatureReport
    error: str | None = None


def sweep(spec: SweepSpec, budget: SecurityBudget, space: SearchSpace | None = None,
          seed: int = 0, effort: int = 1, N: float | None = None, error_form: str = "corrected",
          on_row=None) -> list[SweepRow]:
    """Evaluate or optimize at each grid value, warm-starting from the previous optimum.

    ``N`` overrides the pulse count of ``spec.proto``; without either it is 1e13.
    ``on_row`` is called with each finished row, so callers can flush partial
    results.
    """
    rows = []
    template = spec.proto
    if N is None:
        N = template.N if template is not None else 1e13
    elif template is not None:
        template = replace(template, N=N)
    warm = template
    for i, value in enumerate(spec.grid):
        try:
            sys = replace(spec.sys, **{spec.variable: float(value)})
            if spec.optimize_per_point:
                res = optimize(sys, budget, space, seed=seed + i, effort=effort, x0=warm,
                               template=template, N=N, error_form=error_form)
                row = SweepRow(float(value), res.proto, res.report)
                if res.report.feasible:
                    warm = res.proto
            else:
                report = signature_report(sys, template, budget, error_form=error_form)
                row = SweepRow(float(value), template, report)
        except (ValueError, ArithmeticError) as exc:
            log.warning("sweep point %s=%s failed: %s", spec.variable, value, exc)
            row = SweepRow(float(value), None, SignatureReport(diagnostics=[str(exc)]), str(exc))
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows
