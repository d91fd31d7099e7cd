import numpy as np
import pytest

from tfqds.channel import ProtocolParams, SystemParams
from tfqds.mathcore import SecurityBudget
from tfqds.optimizer import (
    PARAM_NAMES,
    REFERENCE_START,
    SearchSpace,
    SweepSpec,
    objective,
    optimize,
    sweep,
)
from tfqds.pipeline import signature_report

REF = ProtocolParams(**REFERENCE_START)
BUDGET = SecurityBudget()
# rate of the reference point at 50 km (default budget)
R_REF_50KM = 3.2916548013030545e-09


def point_space(proto, free=()):
    bounds = {n: (getattr(proto, n), getattr(proto, n)) for n in PARAM_NAMES}
    for name, interval in dict(free).items():
        bounds[name] = interval
    return SearchSpace(bounds)


def test_objective_values():
    assert objective(SystemParams(eta_d=0.0, p_dc=0.0), REF, BUDGET) == 0.0
    r = signature_report(SystemParams(), REF, SecurityBudget(eps_target=1.0))
    assert objective(SystemParams(), REF, SecurityBudget(eps_target=1.0)) == pytest.approx(r.n_pool / 4 / REF.N)
    assert objective(SystemParams(distance_km=50), REF, BUDGET) == pytest.approx(R_REF_50KM, rel=1e-12)


def test_objective_deterministic():
    sys = SystemParams(distance_km=120)
    assert objective(sys, REF, BUDGET) == objective(sys, REF, BUDGET)


def test_search_space_validation():
    with pytest.raises(ValueError):
        SearchSpace(dict(SearchSpace().bounds, w=(0.5, 0.1)))
    with pytest.raises(ValueError, match="w < v"):
        SearchSpace(dict(SearchSpace().bounds, w=(0.5, 0.6), v=(0.1, 0.2)))
    with pytest.raises(ValueError, match="p_w"):
        SearchSpace(dict(SearchSpace().bounds, p_w=(0.5, 0.6), p_v=(0.5, 0.6)))


def test_projection_enforces_constraints():
    space = SearchSpace()
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = space.project(rng.uniform(space.log_lo - 1, space.log_hi + 1))
        w, v, u, pZ, ps, pw, pv = np.exp(x)
        assert w < v
        assert pw + pv + pZ <= 1.0 - 1e-4 + 1e-12


def test_collapsed_space_returns_point():
    res = optimize(SystemParams(distance_km=50), BUDGET, space=point_space(REF), seed=1)
    for name in PARAM_NAMES:
        assert getattr(res.proto, name) == pytest.approx(getattr(REF, name), rel=1e-12)
    assert res.report.R == pytest.approx(R_REF_50KM, rel=1e-9)


def test_one_dimensional_slice_matches_grid_scan():
    sys = SystemParams(distance_km=50)
    space = point_space(REF, {"u": (0.05, 0.8)})
    res = optimize(sys, BUDGET, space=space, seed=2)
    grid = np.geomspace(0.05, 0.8, 400)
    scan = max(objective(sys, ProtocolParams(**dict(REFERENCE_START, u=float(u))), BUDGET) for u in grid)
    assert res.report.R >= scan * (1 - 1e-2)


def test_optimize_deterministic_and_in_space():
    sys = SystemParams(distance_km=150)
    a = optimize(sys, BUDGET, seed=5)
    b = optimize(sys, BUDGET, seed=5)
    assert a.proto == b.proto and a.report.R == b.report.R
    assert SearchSpace().contains(a.proto)
    assert a.report.feasible and a.report.R > objective(sys, REF, BUDGET)


def test_trace_records_evaluations():
    res = optimize(SystemParams(distance_km=50), BUDGET, seed=0)
    assert len(res.trace) == res.evaluations
    assert res.trace[-1][0] == res.evaluations


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("alpha", [1, 2])
    with pytest.raises(ValueError, match="increasing"):
        SweepSpec("distance_km", [10, 5])
    with pytest.raises(ValueError):
        SweepSpec("distance_km", [])
    with pytest.raises(ValueError):
        SweepSpec("distance_km", [0.0], optimize_per_point=False)


def test_single_point_sweep_equals_optimize():
    spec = SweepSpec("distance_km", [80.0])
    rows = sweep(spec, BUDGET, seed=3)
    res = optimize(SystemParams(distance_km=80.0), BUDGET, seed=3)
    assert rows[0].proto == res.proto
    assert rows[0].report.R == res.report.R


def test_warm_start_never_hurts():
    grid = [100.0, 150.0, 200.0, 250.0]
    rows = sweep(SweepSpec("distance_km", grid), BUDGET, seed=0)
    for i, row in enumerate(rows):
        cold = optimize(SystemParams(distance_km=row.value), BUDGET, seed=i)
        assert row.report.R >= cold.report.R * (1 - 1e-3)


def test_fixed_point_sweep_and_failures():
    spec = SweepSpec("e_d", [0.0, 0.1, 0.6], sys=SystemParams(distance_km=50), optimize_per_point=False, proto=REF)
    seen = []
    rows = sweep(spec, BUDGET, on_row=seen.append)
    assert len(rows) == len(seen) == 3
    assert rows[0].report.R >= rows[1].report.R
    assert rows[2].error is not None and not rows[2].report.feasible


def test_sweep_pulse_count_overrides_template():
    base = ProtocolParams(**dict(REFERENCE_START, N=1e13))
    spec = SweepSpec("distance_km", [50.0], optimize_per_point=False, proto=base)
    assert sweep(spec, BUDGET)[0].proto.N == 1e13
    row = sweep(spec, BUDGET, N=1e15)[0]
    assert row.proto.N == 1e15
    assert row.report.n_pool > 50 * sweep(spec, BUDGET)[0].report.n_pool
