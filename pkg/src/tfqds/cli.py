"""Command-line entry point: ``rate``, ``sweep``, ``optimize`` and ``simulate``.

Exit codes: 0 success, 1 error, 2 infeasible (no secure signing anywhere).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from contextlib import contextmanager
from dataclasses import asdict, replace

from .config import ConfigError, RunConfig, dump_config, load_config, validate
from .optimizer import PARAM_NAMES, optimize, sweep
from .pipeline import signature_report
from .simulator import simulate

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

SWEEP_COLUMNS = ("grid_value", "w", "v", "u", "p_Z", "p_s", "p_w", "p_v", "L", "n_pool",
                 "n_bits", "R", "P_robust", "P_repudiation", "P_forge", "feasible")
TRACE_COLUMNS = ("evaluation",) + PARAM_NAMES + ("R", "feasible")

log = logging.getLogger("tfqds")


def fmt(x) -> str:
    """Fixed 17-significant-digit formatting for CSV cells."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_json(path, payload) -> None:
    with _open_out(path) as fh:
        json.dump(_jsonable(payload), fh, indent=2)
        fh.write("\n")


def cmd_rate(cfg: RunConfig) -> int:
    report = signature_report(cfg.system, cfg.protocol, cfg.budget, error_form=cfg.error_form)
    _write_json(cfg.output.path, {
        "system": asdict(cfg.system),
        "protocol": asdict(cfg.protocol),
        "error_form": cfg.error_form,
        "report": report.to_dict(),
    })
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def sweep_row_cells(row) -> list[str]:
    r = row.report
    proto = [getattr(row.proto, n) if row.proto is not None else math.nan for n in PARAM_NAMES]
    values = [row.value, *proto, r.L, r.n_pool, r.n_bits, r.R, r.P_robust, r.P_repudiation,
              r.P_forge, r.feasible]
    return [fmt(v) for v in values]


def cmd_sweep(cfg: RunConfig) -> int:
    spec = cfg.sweep_spec()
    feasible = 0
    with _open_out(cfg.output.path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        fh.flush()

        def emit(row):
            nonlocal feasible
            feasible += row.report.feasible
            writer.writerow(sweep_row_cells(row))
            fh.flush()

        sweep(spec, cfg.budget, cfg.search_space, seed=cfg.seed, effort=cfg.effort,
              N=cfg.protocol.N, error_form=cfg.error_form, on_row=emit)
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_optimize(cfg: RunConfig) -> int:
    res = optimize(cfg.system, cfg.budget, cfg.search_space, seed=cfg.seed, effort=cfg.effort,
                   x0=cfg.protocol, template=cfg.protocol, error_form=cfg.error_form)
    _write_json(cfg.output.path, {
        "system": asdict(cfg.system),
        "protocol": asdict(res.proto),
        "evaluations": res.evaluations,
        "report": res.report.to_dict(),
    })
    if cfg.output.trace is not None:
        with open(cfg.output.trace, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for entry in res.trace:
                writer.writerow([fmt(v) for v in entry])
    return EXIT_OK if res.report.feasible else EXIT_INFEASIBLE


def cmd_simulate(cfg: RunConfig) -> int:
    sim = cfg.simulation
    report = signature_report(cfg.system, cfg.protocol, cfg.budget, error_form=cfg.error_form)
    if not report.feasible:
        log.error("infeasible: no signature length meets the security target at this point")
        return EXIT_INFEASIBLE
    summary = simulate(cfg.system, cfg.protocol, cfg.budget, sim.trials, seed=cfg.seed,
                       adversary_trials=sim.adversary_trials, p_guess=sim.p_guess,
                       error_form=cfg.error_form)
    _write_json(cfg.output.path, {
        "system": asdict(cfg.system),
        "protocol": asdict(cfg.protocol),
        "simulation": summary.to_dict(),
    })
    return EXIT_OK


COMMANDS = {"rate": cmd_rate, "sweep": cmd_sweep, "optimize": cmd_optimize, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfqds", description="Twin-field quantum digital signature toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (omitted fields take defaults)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--distance-km", type=float)
    common.add_argument("--e-d", type=float)
    common.add_argument("--N", type=float)
    common.add_argument("--eps-target", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--as-printed", action="store_true",
                        help="use the uncorrected form of the error-count decoy bound")
    common.add_argument("--emit-config", metavar="PATH", help="write the effective config to PATH")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("rate", parents=[common], help="signature rate at one parameter point (JSON)")
    sw = sub.add_parser("sweep", parents=[common], help="distance or misalignment sweep (CSV)")
    sw.add_argument("--variable", choices=("distance_km", "e_d"))
    sw.add_argument("--grid", metavar="START:STOP:STEP", help="grid for the swept variable")
    sw.add_argument("--no-optimize", action="store_true", help="evaluate the fixed protocol point")
    opt = sub.add_parser("optimize", parents=[common], help="optimize the protocol parameters (JSON)")
    opt.add_argument("--trace", help="CSV file for the evaluation trace")
    opt.add_argument("--effort", type=int)
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo trials (JSON)")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--adversary-trials", type=int)
    return parser


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    system = {}
    if args.distance_km is not None:
        system["distance_km"] = args.distance_km
    if args.e_d is not None:
        system["e_d"] = args.e_d
    try:
        if system:
            cfg.system = replace(cfg.system, **system)
        if args.N is not None:
            cfg.protocol = replace(cfg.protocol, N=args.N)
        if args.eps_target is not None:
            cfg.budget = replace(cfg.budget, eps_target=args.eps_target)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.seed is not None:
        cfg.seed = args.seed
    if args.as_printed:
        cfg.error_form = "printed"
    if args.out is not None:
        cfg.output.path = args.out
    if getattr(args, "trace", None) is not None:
        cfg.output.trace = args.trace
    if getattr(args, "effort", None) is not None:
        cfg.effort = args.effort
    if getattr(args, "variable", None) is not None:
        cfg.sweep.variable = args.variable
    if getattr(args, "grid", None) is not None:
        try:
            start, stop, step = (float(t) for t in args.grid.split(":"))
        except ValueError as exc:
            raise ConfigError("--grid must look like START:STOP:STEP") from exc
        cfg.sweep.start, cfg.sweep.stop, cfg.sweep.step, cfg.sweep.grid = start, stop, step, None
    if getattr(args, "no_optimize", False):
        cfg.sweep.optimize = False
    if getattr(args, "trials", None) is not None:
        cfg.simulation.trials = args.trials
    if getattr(args, "adversary_trials", None) is not None:
        cfg.simulation.adversary_trials = args.adversary_trials
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.emit_config:
            with open(args.emit_config, "w", encoding="utf-8") as fh:
                fh.write(dump_config(cfg) + "\n")
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def run(command: str, cfg: RunConfig) -> int:
    """Run a subcommand on an already-loaded config."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    return COMMANDS[command](cfg)


if __name__ == "__main__":
    raise SystemExit(main())
