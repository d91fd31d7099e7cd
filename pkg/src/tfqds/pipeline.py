"""End-to-end evaluation of one parameter point."""

from __future__ import annotations

from .channel import ProtocolParams, SystemParams, expected_observables
from .estimation import EstimationFailure, estimation_context
from .mathcore import SecurityBudget
from .security import KeyAccounting, SignatureReport, signature_length, signature_rate


def signature_report(sys: SystemParams, proto: ProtocolParams, budget: SecurityBudget,
                     error_form: str = "corrected", obs=None) -> SignatureReport:
    """Channel model -> finite-size estimation -> minimal L -> signature rate.

    ``obs`` may carry sampled observables in place of the analytic ones.
    """
    if obs is None:
        obs = expected_observables(sys, proto)
    ka = KeyAccounting.from_sifted(obs.n_Z, proto.r_ET, obs.E_Z)
    if ka.n_pool < 2 or ka.n_test < 1:
        report = SignatureReport(n_pool=ka.n_pool, diagnostics=["key pool too small"])
        return report
    try:
        ctx = estimation_context(obs, proto, budget.eps_SF, error_form=error_form)
    except EstimationFailure as exc:
        return SignatureReport(n_pool=ka.n_pool, diagnostics=[f"estimation failure: {exc}"])
    search = signature_length(ka, ctx, budget)
    report = signature_rate(ka, proto.N, search.L, search.evaluation, budget, search.notes)
    report.diagnostics.extend(ctx.xb.notes + ctx.zb.notes)
    if search.at_max is not None:
        report.eps_at_max_L = search.at_max.level
    return report
