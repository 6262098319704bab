"""Command-line front end.

Exit codes: 0 success, 1 failed verdict (certify/refine), 2 usage or config
error, 3 numerical failure. All numeric output uses repr precision so that
repeated runs with the same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from fractions import Fraction
from importlib import resources

from .certify import (
    CertificationHarness,
    ContextSpec,
    Ledger,
    NoFeasibleBound,
    Stage,
    UseContextPair,
)
from .checker import (
    CheckError,
    NonConvergence,
    SolverConfig,
    UntilProperty,
    max_until,
    read_policy,
    simulate,
    write_policy,
)
from .expr import ParameterRegion
from .model import ModelError, instantiate, write_explicit
from .scenario import (
    GridScenario,
    InvalidScenario,
    build,
    scenario_from_dict,
    scenario_to_dict,
)
from .sweep import GridMode, RandomMode, SweepSpec, TiedMode, run_sweep, to_csv

DEFAULT_LEDGER = "ledger.jsonl"
LEDGER_ENV = "PMDP_CERTIFY_LEDGER"


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, path, detail):
        super().__init__(f"{path}: {detail}")
        self.path = path


class ValidationError(ConfigError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


@dataclasses.dataclass(frozen=True)
class RunConfig:
    scenario: GridScenario
    parameters: ParameterRegion
    prop: UntilProperty
    solver: SolverConfig
    sweep_mode: object

    def to_dict(self) -> dict:
        d = {
            "scenario": scenario_to_dict(self.scenario),
            "parameters": {n: [float(lo), float(hi)]
                           for n, (lo, hi) in sorted(self.parameters.bounds.items())},
            "property": {"avoid": self.prop.avoid, "reach": self.prop.reach},
            "solver": {"epsilon": self.solver.epsilon,
                       "max_iterations": self.solver.max_iterations},
            "sweep": _mode_to_dict(self.sweep_mode),
        }
        return d

    def sweep_spec(self, region: ParameterRegion = None) -> SweepSpec:
        return SweepSpec(mode=self.sweep_mode,
                         region=region or self.parameters,
                         solver=self.solver)


def _mode_to_dict(mode) -> dict:
    if isinstance(mode, GridMode):
        return {"mode": "grid", "points": mode.points_per_dim}
    if isinstance(mode, RandomMode):
        return {"mode": "random", "samples": mode.count, "seed": mode.seed}
    d = {"mode": "tied", "params": list(mode.params),
         "range": [float(mode.lo), float(mode.hi)], "samples": mode.count}
    if mode.seed is not None:
        d["seed"] = mode.seed
    return d


def _mode_from_dict(d: dict):
    kind = d.get("mode", "random")
    try:
        if kind == "grid":
            return GridMode(int(d["points"]))
        if kind == "random":
            if "seed" not in d:
                raise ValidationError("sweep.seed",
                                      "random sweeps must carry an explicit seed")
            return RandomMode(int(d["samples"]), int(d["seed"]))
        if kind == "tied":
            lo, hi = d["range"]
            seed = d.get("seed")
            return TiedMode(tuple(d.get("params", ("p1", "p2"))),
                            Fraction(lo), Fraction(hi), int(d["samples"]),
                            None if seed is None else int(seed))
    except KeyError as exc:
        raise ValidationError(f"sweep.{exc.args[0]}", "missing field") from exc
    raise ValidationError("sweep.mode", f"unknown mode {kind!r}")


def resolve_config_path(name: str) -> str:
    """A filesystem path, or the name of a packaged preset like reference-open."""
    if os.path.exists(name):
        return name
    base = name[:-5] if name.endswith(".json") else name
    ref = resources.files("pmdpcert").joinpath("configs", f"{base}.json")
    if ref.is_file():
        return str(ref)
    raise ParseError(name, "no such file or packaged preset")


def load_config(path) -> RunConfig:
    """Parse and cross-validate a run config, applying all defaults explicitly."""
    real = resolve_config_path(path)
    try:
        with open(real) as f:
            # Floats in configs are read as exact decimal rationals; the
            # solver block converts back to float below.
            raw = json.load(f, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict) or "scenario" not in raw:
        raise ValidationError("scenario", "config must contain a scenario object")

    scenario = scenario_from_dict(raw["scenario"])
    problems = scenario.problems()
    if problems:
        field, reason = problems[0]
        raise ValidationError(field, reason)

    params_raw = raw.get("parameters", {"p1": [0, 1], "p2": [0, 1]})
    try:
        parameters = ParameterRegion(
            {n: (Fraction(lo), Fraction(hi)) for n, (lo, hi) in params_raw.items()})
    except (ValueError, TypeError) as exc:
        raise ValidationError("parameters", str(exc)) from exc
    for required in ("p1", "p2"):
        if required not in parameters.bounds:
            raise ValidationError("parameters", f"missing interval for {required!r}")

    prop_raw = raw.get("property", {})
    prop = UntilProperty(avoid=prop_raw.get("avoid", "crash"),
                         reach=prop_raw.get("reach", "goal"))
    for side, label in (("avoid", prop.avoid), ("reach", prop.reach)):
        if label not in ("crash", "goal"):
            raise ValidationError(f"property.{side}",
                                  f"scenario models label only crash/goal, got {label!r}")

    solver_raw = raw.get("solver", {})
    try:
        solver = SolverConfig(
            epsilon=float(solver_raw.get("epsilon", 1e-6)),
            max_iterations=int(solver_raw.get("max_iterations", 1_000_000)))
    except ValueError as exc:
        raise ValidationError("solver", str(exc)) from exc

    mode = _mode_from_dict(raw.get("sweep", {"mode": "grid", "points": 10}))
    config = RunConfig(scenario, parameters, prop, solver, mode)

    if isinstance(mode, TiedMode):
        for n in mode.params:
            if n not in parameters.bounds:
                raise ValidationError("sweep.params", f"{n!r} not in parameters")
    return config


def _valuation_from_args(config: RunConfig, args) -> dict:
    if args.p1 is None or args.p2 is None:
        raise ValidationError("valuation", "--p1 and --p2 are required here")
    return {"p1": args.p1, "p2": args.p2}


def _ledger_path(args) -> str:
    if getattr(args, "ledger", None):
        return args.ledger
    return os.environ.get(LEDGER_ENV, DEFAULT_LEDGER)


def _policy_header(config: RunConfig) -> str:
    s = config.scenario
    return (f"policy for {s.context.value} scenario {s.width}x{s.height}; "
            f"states decode to (uav, mode, robot) via pmdpcert.scenario.decode; "
            f"action index is local to the state's enabled list")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_check(config: RunConfig, args) -> int:
    v = _valuation_from_args(config, args)
    model = build(config.scenario)
    if args.dump_model:
        with open(args.dump_model, "w") as f:
            write_explicit(model, f)
    concrete = instantiate(model, v)
    result = max_until(concrete, config.prop, config.solver)
    print(repr(result.value_at_initial))
    if args.out:
        with open(args.out, "w") as f:
            write_policy(result.policy, f, header=_policy_header(config))
    return 0


def _cmd_synthesize(config: RunConfig, args) -> int:
    if not args.out:
        raise ValidationError("out", "--out PATH is required for synthesize")
    v = _valuation_from_args(config, args)
    model = build(config.scenario)
    result = max_until(instantiate(model, v), config.prop, config.solver)
    with open(args.out, "w") as f:
        write_policy(result.policy, f, header=_policy_header(config))
    print(repr(result.value_at_initial))
    return 0


def _cmd_simulate(config: RunConfig, args) -> int:
    v = _valuation_from_args(config, args)
    model = build(config.scenario)
    concrete = instantiate(model, v)
    if args.policy:
        with open(args.policy) as f:
            policy = read_policy(f)
    else:
        policy = max_until(concrete, config.prop, config.solver).policy
    seed = args.seed if args.seed is not None else 0
    freq = simulate(concrete, policy, config.prop,
                    episodes=args.episodes, horizon=args.horizon, seed=seed)
    print(repr(freq))
    return 0


def _apply_seed_override(mode, seed):
    if seed is None:
        return mode
    if isinstance(mode, RandomMode):
        return RandomMode(mode.count, seed)
    if isinstance(mode, TiedMode):
        return TiedMode(mode.params, mode.lo, mode.hi, mode.count, seed)
    return mode


def _cmd_sweep(config: RunConfig, args) -> int:
    model = build(config.scenario)
    mode = _apply_seed_override(config.sweep_mode, args.seed)
    spec = SweepSpec(mode=mode, region=config.parameters, solver=config.solver)
    result = run_sweep(model, config.prop, spec)
    if args.out:
        with open(args.out, "w", newline="") as f:
            f.write(to_csv(result))
    else:
        sys.stdout.write(to_csv(result))
    print(result.summary_json())
    return 0


def _pair_from_config(config: RunConfig, args) -> UseContextPair:
    context = ContextSpec(name=args.context_name,
                          scenario=config.scenario,
                          region=config.parameters)
    return UseContextPair(pair_id=args.pair_id, prop=config.prop,
                          threshold=args.theta, context=context)


def _cmd_certify(config: RunConfig, args) -> int:
    if args.theta is None:
        raise ValidationError("theta", "--theta is required for certify")
    harness = CertificationHarness(Ledger(_ledger_path(args)))
    pair = harness.add_pair(_pair_from_config(config, args))
    mode = _apply_seed_override(config.sweep_mode, args.seed)
    verdict = harness.evaluate_context(pair.pair_id, mode, config.solver,
                                       rationale=args.rationale)
    print(json.dumps({"pair": pair.pair_id, "verdict": verdict.outcome,
                      "evidence": verdict.evidence}, sort_keys=True))
    if verdict.outcome == "pass":
        return 0
    return 3 if verdict.outcome == "undetermined" else 1


def _cmd_refine(config: RunConfig, args) -> int:
    if args.theta is None:
        raise ValidationError("theta", "--theta is required for refine")
    harness = CertificationHarness(Ledger(_ledger_path(args)))
    pair = harness.add_pair(_pair_from_config(config, args))
    mode = _apply_seed_override(config.sweep_mode, args.seed)
    try:
        lo, hi = harness.refine_parameter_bound(
            pair.pair_id, args.param, mode, config.solver, tol=args.tol,
            rationale=args.rationale)
    except NoFeasibleBound as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(json.dumps({"pair": pair.pair_id, "param": args.param,
                      "interval": [float(lo), float(hi)]}, sort_keys=True))
    return 0


def _cmd_ledger_show(args) -> int:
    ledger = Ledger(_ledger_path(args))
    if not ledger.entries:
        print("ledger is empty")
        return 0
    latest = {}
    for e in ledger.entries:
        latest.setdefault(e.pair_id, {"stage": Stage.EARLY_PHASE.value,
                                      "status": "proposed", "entries": 0})
        st = latest[e.pair_id]
        st["entries"] += 1
        if e.action == "Evaluated":
            st["status"] = e.evidence.get("status", st["status"])
        elif e.action == "StageChanged":
            st["stage"] = e.evidence.get("to", st["stage"])
    width = max(len(p) for p in latest)
    print(f"{'pair':<{width}}  {'stage':<12}  {'status':<9}  entries")
    for pid in sorted(latest):
        st = latest[pid]
        print(f"{pid:<{width}}  {st['stage']:<12}  {st['status']:<9}  {st['entries']}")
    for e in ledger.entries:
        print(f"[{e.seq}] {e.timestamp} {e.pair_id} {e.action} "
              f"{json.dumps(e.evidence, sort_keys=True)}"
              + (f" -- {e.rationale}" if e.rationale else ""))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pmdpcert",
        description="Parametric-MDP policy synthesis, sweeps, and dynamic certification")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True,
                            help="config JSON path or packaged preset name")
        sp.add_argument("--print-config", action="store_true",
                        help="print the fully-resolved config and exit")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("check", help="solve one valuation")
    common(sp)
    sp.add_argument("--p1", type=Fraction, default=None)
    sp.add_argument("--p2", type=Fraction, default=None)
    sp.add_argument("--dump-model", default=None,
                    help="write the symbolic model in explicit-state text form")

    sp = sub.add_parser("synthesize", help="export the optimal policy")
    common(sp)
    sp.add_argument("--p1", type=Fraction, default=None)
    sp.add_argument("--p2", type=Fraction, default=None)

    sp = sub.add_parser("simulate", help="Monte Carlo conformance estimate")
    common(sp)
    sp.add_argument("--p1", type=Fraction, default=None)
    sp.add_argument("--p2", type=Fraction, default=None)
    sp.add_argument("--episodes", type=int, default=10_000)
    sp.add_argument("--horizon", type=int, default=10_000)
    sp.add_argument("--policy", default=None, help="replay an exported policy file")

    sp = sub.add_parser("sweep", help="parameter sweep to CSV + summary JSON")
    common(sp)

    sp = sub.add_parser("certify", help="threshold verdict over the config region")
    common(sp)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--pair-id", default="default")
    sp.add_argument("--context-name", default="config")
    sp.add_argument("--rationale", default="")
    sp.add_argument("--ledger", default=None)

    sp = sub.add_parser("refine", help="bisect the largest passing parameter bound")
    common(sp)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--param", default="p1")
    sp.add_argument("--tol", type=float, default=0.01)
    sp.add_argument("--pair-id", default="default")
    sp.add_argument("--context-name", default="config")
    sp.add_argument("--rationale", default="")
    sp.add_argument("--ledger", default=None)

    sp = sub.add_parser("ledger", help="ledger inspection")
    lsub = sp.add_subparsers(dest="ledger_command", required=True)
    lshow = lsub.add_parser("show", help="summary table and entries")
    lshow.add_argument("--ledger", default=None)

    return p


_HANDLERS = {
    "check": _cmd_check,
    "synthesize": _cmd_synthesize,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "certify": _cmd_certify,
    "refine": _cmd_refine,
}


def dispatch(argv) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "ledger":
            return _cmd_ledger_show(args)
        config = load_config(args.config)
        if args.print_config:
            print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
            return 0
        return _HANDLERS[args.command](config, args)
    except (ConfigError, InvalidScenario) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonConvergence as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (CheckError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
