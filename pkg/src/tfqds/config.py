"""JSON run configuration: defaults, strict parsing and validation.

Schema (every section and field optional; unknown keys are rejected)::

    {
      "system":   {"alpha_db_per_km": 0.2, "eta_d": 0.5, "p_dc": 1e-7,
                   "e_d": 0.03, "distance_km": 0.0},
      "protocol": {"w": 0.01, "v": 0.08, "u": 0.3, "p_w": 0.07, "p_v": 0.14,
                   "p_Z": 0.75, "p_s": 0.04, "M": 16, "N": 1e13, "r_ET": 0.055},
      "budget":   {"eps_PE": 1e-12, "eps_SF": 1e-12, "g": 1e-12,
                   "eps_target": 1e-5, "eps_smooth": 1e-30},
      "search_space": {"w": [1e-4, 1.0], ...},
      "sweep":    {"variable": "distance_km", "start": 0, "stop": 400, "step": 10,
                   "grid": null, "optimize": true},
      "simulation": {"trials": 20, "adversary_trials": 10000, "p_guess": 0.5},
      "error_form": "corrected",
      "seed": 0,
      "effort": 1,
      "output": {"path": null, "trace": null}
    }

``sweep.grid`` (an explicit list) takes precedence over start/stop/step.
The protocol section doubles as the warm start and as the source of M, N and
r_ET when optimizing.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields

from .channel import ProtocolParams, SystemParams
from .estimation import ERROR_FORMS
from .mathcore import SecurityBudget
from .optimizer import PARAM_NAMES, REFERENCE_START, SearchSpace, SweepSpec


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


DEFAULT_PROTOCOL = dict(REFERENCE_START, M=16, N=1e13, r_ET=0.055)


@dataclass
class SweepConfig:
    variable: str = "distance_km"
    start: float = 0.0
    stop: float = 400.0
    step: float = 10.0
    grid: list | None = None
    optimize: bool = True

    def values(self) -> list[float]:
        if self.grid is not None:
            return [float(x) for x in self.grid]
        if self.step <= 0:
            raise ConfigError("sweep.step must be positive")
        if self.stop < self.start:
            raise ConfigError("sweep.stop must be >= sweep.start")
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 12) for i in range(count)]


@dataclass
class SimulationConfig:
    trials: int = 20
    adversary_trials: int = 10000
    p_guess: float = 0.5


@dataclass
class OutputConfig:
    path: str | None = None
    trace: str | None = None


@dataclass
class RunConfig:
    system: SystemParams = field(default_factory=SystemParams)
    protocol: ProtocolParams = field(default_factory=lambda: ProtocolParams(**DEFAULT_PROTOCOL))
    budget: SecurityBudget = field(default_factory=SecurityBudget)
    search_space: SearchSpace = field(default_factory=SearchSpace)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    error_form: str = "corrected"
    seed: int = 0
    effort: int = 1
    output: OutputConfig = field(default_factory=OutputConfig)

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(self.sweep.variable, self.sweep.values(), sys=self.system,
                         optimize_per_point=self.sweep.optimize, proto=self.protocol)

    def to_dict(self) -> dict:
        return {
            "system": asdict(self.system),
            "protocol": asdict(self.protocol),
            "budget": asdict(self.budget),
            "search_space": {k: list(v) for k, v in self.search_space.bounds.items()},
            "sweep": asdict(self.sweep),
            "simulation": asdict(self.simulation),
            "error_form": self.error_form,
            "seed": self.seed,
            "effort": self.effort,
            "output": asdict(self.output),
        }


def _section(cls, data, name: str, defaults: dict | None = None):
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {', '.join(unknown)}")
    values = dict(defaults or {})
    values.update(data)
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


TOP_LEVEL = ("system", "protocol", "budget", "search_space", "sweep", "simulation",
             "error_form", "seed", "effort", "output")


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    unknown = sorted(set(data) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(f"config: unknown field(s) {', '.join(unknown)}")
    cfg = RunConfig(
        system=_section(SystemParams, data.get("system", {}), "system"),
        protocol=_section(ProtocolParams, data.get("protocol", {}), "protocol", DEFAULT_PROTOCOL),
        budget=_section(SecurityBudget, data.get("budget", {}), "budget"),
        sweep=_section(SweepConfig, data.get("sweep", {}), "sweep"),
        simulation=_section(SimulationConfig, data.get("simulation", {}), "simulation"),
        output=_section(OutputConfig, data.get("output", {}), "output"),
    )
    space = data.get("search_space", {})
    if not isinstance(space, dict):
        raise ConfigError("search_space: expected an object")
    unknown = sorted(set(space) - set(PARAM_NAMES))
    if unknown:
        raise ConfigError(f"search_space: unknown field(s) {', '.join(unknown)}")
    bounds = dict(cfg.search_space.bounds)
    for name, pair in space.items():
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"search_space.{name}: expected [lo, hi]")
        bounds[name] = (float(pair[0]), float(pair[1]))
    try:
        cfg.search_space = SearchSpace(bounds)
    except ValueError as exc:
        raise ConfigError(f"search_space: {exc}") from exc

    cfg.error_form = data.get("error_form", cfg.error_form)
    cfg.seed = data.get("seed", cfg.seed)
    cfg.effort = data.get("effort", cfg.effort)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.error_form not in ERROR_FORMS:
        raise ConfigError(f"error_form must be one of {ERROR_FORMS}")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if not isinstance(cfg.effort, int) or isinstance(cfg.effort, bool) or cfg.effort < 1:
        raise ConfigError("effort must be a positive integer")
    sim = cfg.simulation
    if not isinstance(sim.trials, int) or sim.trials < 1:
        raise ConfigError("simulation.trials must be a positive integer")
    if not isinstance(sim.adversary_trials, int) or sim.adversary_trials < 1:
        raise ConfigError("simulation.adversary_trials must be a positive integer")
    if not 0.0 <= sim.p_guess <= 1.0:
        raise ConfigError("simulation.p_guess must lie in [0, 1]")
    for name in ("path", "trace"):
        path = getattr(cfg.output, name)
        if path is not None:
            parent = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(parent):
                raise ConfigError(f"output.{name}: directory {parent} does not exist")
    try:
        cfg.sweep_spec()
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from exc


def load_config(path: str | None) -> RunConfig:
    """Read a JSON config; ``None``, an empty file or ``{}`` give the defaults."""
    if path is None:
        return config_from_dict({})
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not text.strip():
        return config_from_dict({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2)
