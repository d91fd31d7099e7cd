"""Finite-size analysis and simulation of twin-field quantum digital signatures."""

from .channel import ChannelObservables, ProtocolParams, SystemParams, expected_observables
from .estimation import EstimationFailure, estimation_context
from .mathcore import SecurityBudget, binary_entropy, inverse_binary_entropy
from .optimizer import REFERENCE_START, OptimizationResult, SearchSpace, SweepSpec, optimize, sweep
from .pipeline import signature_report
from .security import Infeasible, KeyAccounting, SignatureReport, signature_length
from .simulator import SimulationSummary, simulate

__all__ = [
    "REFERENCE_START", "ChannelObservables", "EstimationFailure", "Infeasible", "KeyAccounting", "OptimizationResult",
    "ProtocolParams", "SearchSpace", "SecurityBudget", "SignatureReport", "SimulationSummary", "SweepSpec", "SystemParams",
    "binary_entropy", "estimation_context", "expected_observables", "inverse_binary_entropy",
    "optimize", "signature_length", "signature_report", "simulate", "sweep",
]
