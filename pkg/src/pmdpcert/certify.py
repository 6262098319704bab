"""Dynamic-certification harness.

A use/context pair couples a mission objective (until property plus a
probability threshold) with a deployment context (scenario plus parameter
region). Evidence comes from seeded parameter sweeps; the certification
rule is sampled-min >= threshold, with the argmin and a digest of the full
sample table recorded in an append-only JSON-lines ledger. Stage movement
carries no gating logic: pairs may move between early-phase, transitional,
and confirmatory testing in any direction, and every move is a ledger entry.

Replaying a ledger reconstructs each pair's stage, status, and (refined)
region exactly; entries are therefore self-contained.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction

from .checker import NonConvergence, SolverConfig, UntilProperty
from .expr import ParameterRegion
from .scenario import GridScenario, build
from .sweep import SweepSpec, run_sweep, to_csv


class CertifyError(Exception):
    pass


class UnknownPair(CertifyError):
    def __init__(self, pair_id):
        super().__init__(f"no use/context pair with id {pair_id!r}")


class NoFeasibleBound(CertifyError):
    def __init__(self, param, theta):
        super().__init__(
            f"threshold {theta} already fails with {param} pinned to 0")


class Stage(enum.Enum):
    EARLY_PHASE = "early-phase"
    TRANSITIONAL = "transitional"
    CONFIRMATORY = "confirmatory"


class Status(enum.Enum):
    PROPOSED = "proposed"
    CERTIFIED = "certified"
    REJECTED = "rejected"


@dataclass(frozen=True)
class ContextSpec:
    name: str
    scenario: GridScenario
    region: ParameterRegion


@dataclass(frozen=True)
class BaseModelSpec:
    """The four-component base model: modules, contexts, mappings, variations."""

    modules: tuple
    contexts: dict                  # name -> ContextSpec
    mappings: tuple                 # (UntilProperty, threshold)
    variations: ParameterRegion

    def __post_init__(self):
        if not self.modules:
            raise ValueError("base model needs at least one module")
        for _, theta in self.mappings:
            if not 0 <= theta <= 1:
                raise ValueError(f"mapping threshold {theta} outside [0, 1]")


@dataclass
class UseContextPair:
    pair_id: str
    prop: UntilProperty
    threshold: float
    context: ContextSpec
    stage: Stage = Stage.EARLY_PHASE
    status: Status = Status.PROPOSED

    def state(self) -> dict:
        """Replay-comparable snapshot of the mutable certification state."""
        return {
            "stage": self.stage.value,
            "status": self.status.value,
            "region": {n: [str(lo), str(hi)]
                       for n, (lo, hi) in sorted(self.context.region.bounds.items())},
        }


@dataclass(frozen=True)
class Verdict:
    outcome: str                    # "pass" | "fail" | "undetermined"
    evidence: dict


@dataclass(frozen=True)
class LedgerEntry:
    seq: int
    timestamp: str
    pair_id: str
    action: str                     # "Evaluated" | "StageChanged" | "RegionRefined"
    evidence: dict
    rationale: str

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "LedgerEntry":
        d = json.loads(line)
        return LedgerEntry(d["seq"], d["timestamp"], d["pair_id"],
                           d["action"], d["evidence"], d["rationale"])


class Ledger:
    """Append-only JSON-lines evidence log (single-writer contract)."""

    def __init__(self, path=None):
        self.path = path
        self.entries = []
        if path is not None:
            try:
                with open(path) as f:
                    self.entries = [LedgerEntry.from_json(line)
                                    for line in f if line.strip()]
            except FileNotFoundError:
                pass

    def append(self, pair_id: str, action: str, evidence: dict, rationale: str) -> LedgerEntry:
        entry = LedgerEntry(
            seq=self.entries[-1].seq + 1 if self.entries else 1,
            timestamp=datetime.now(timezone.utc).isoformat(),
            pair_id=pair_id,
            action=action,
            evidence=evidence,
            rationale=rationale,
        )
        self.entries.append(entry)
        if self.path is not None:
            with open(self.path, "a") as f:
                f.write(entry.to_json() + "\n")
        return entry


def _region_json(region: ParameterRegion) -> dict:
    return {n: [str(lo), str(hi)] for n, (lo, hi) in sorted(region.bounds.items())}


class CertificationHarness:
    """Holds the live pairs and writes the evidence ledger."""

    def __init__(self, ledger: Ledger = None):
        self.ledger = ledger if ledger is not None else Ledger()
        self.pairs = {}

    def add_pair(self, pair: UseContextPair) -> UseContextPair:
        if pair.pair_id in self.pairs:
            raise CertifyError(f"duplicate pair id {pair.pair_id!r}")
        self.pairs[pair.pair_id] = pair
        return pair

    def _get(self, pair_id: str) -> UseContextPair:
        if pair_id not in self.pairs:
            raise UnknownPair(pair_id)
        return self.pairs[pair_id]

    # -- evaluation -------------------------------------------------------

    def evaluate_context(self, pair_id: str, mode,
                         solver: SolverConfig = SolverConfig(),
                         rationale: str = "") -> Verdict:
        """Sweep the pair's context region; Pass iff the sampled minimum
        clears the pair's threshold. Appends the verdict with argmin
        evidence and a digest of the full CSV sample table."""
        pair = self._get(pair_id)
        model = build(pair.context.scenario)
        spec = SweepSpec(mode=mode, region=pair.context.region, solver=solver)
        try:
            result = run_sweep(model, pair.prop, spec)
        except NonConvergence as exc:
            evidence = {
                "theta": pair.threshold,
                "error": str(exc),
                "status": pair.status.value,
            }
            self.ledger.append(pair_id, "Evaluated", evidence,
                               rationale or "sweep failed to converge")
            return Verdict("undetermined", evidence)

        passed = result.min >= pair.threshold
        pair.status = Status.CERTIFIED if passed else Status.REJECTED
        evidence = {
            "theta": pair.threshold,
            "summary": result.summary(),
            "csv_sha256": hashlib.sha256(to_csv(result).encode()).hexdigest(),
            "region": _region_json(pair.context.region),
            "status": pair.status.value,
        }
        self.ledger.append(pair_id, "Evaluated", evidence, rationale)
        return Verdict("pass" if passed else "fail", evidence)

    # -- stage movement ---------------------------------------------------

    def transition_stage(self, pair_id: str, to: Stage, rationale: str) -> LedgerEntry:
        """Unconditional stage move (any direction, including no-ops)."""
        pair = self._get(pair_id)
        evidence = {"from": pair.stage.value, "to": to.value}
        pair.stage = to
        return self.ledger.append(pair_id, "StageChanged", evidence, rationale)

    # -- parameter-bound refinement ----------------------------------------

    def refine_parameter_bound(self, pair_id: str, param: str, mode,
                               solver: SolverConfig = SolverConfig(),
                               tol: float = 0.01,
                               rationale: str = "") -> tuple:
        """Largest upper bound b (within tol) such that the context region
        with `param` restricted to [0, b] still passes the threshold.

        Bisection over b in [0, 1]; the pair's region is revised to the
        returned interval and the bracketing probes are recorded.
        """
        pair = self._get(pair_id)
        model = build(pair.context.scenario)
        tol = Fraction(tol)
        probes = []

        def probe(b: Fraction) -> bool:
            region = pair.context.region.with_interval(param, 0, b)
            spec = SweepSpec(mode=mode, region=region, solver=solver)
            result = run_sweep(model, pair.prop, spec)
            ok = result.min >= pair.threshold
            probes.append({"b": float(b), "min": result.min, "pass": ok})
            return ok

        if not probe(Fraction(0)):
            raise NoFeasibleBound(param, pair.threshold)
        lo, hi = Fraction(0), Fraction(1)
        if probe(hi):
            lo = hi
        else:
            while hi - lo > tol:
                mid = (lo + hi) / 2
                if probe(mid):
                    lo = mid
                else:
                    hi = mid

        new_region = pair.context.region.with_interval(param, 0, lo)
        pair.context = dataclasses.replace(pair.context, region=new_region)
        evidence = {
            "param": param,
            "interval": [0.0, float(lo)],
            "interval_exact": [str(Fraction(0)), str(lo)],
            "theta": pair.threshold,
            "probes": probes,
            "region": _region_json(new_region),
        }
        self.ledger.append(pair_id, "RegionRefined", evidence, rationale)
        return (Fraction(0), lo)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def replay(entries, base_pairs: dict) -> dict:
    """Reconstruct every pair's (stage, status, region) from ledger entries.

    base_pairs maps pair id to its as-proposed UseContextPair; the input
    pairs are not mutated.
    """
    states = {pid: p.state() for pid, p in base_pairs.items()}
    for e in entries:
        if e.pair_id not in states:
            raise UnknownPair(e.pair_id)
        st = states[e.pair_id]
        if e.action == "Evaluated":
            st["status"] = e.evidence["status"]
        elif e.action == "StageChanged":
            st["stage"] = e.evidence["to"]
        elif e.action == "RegionRefined":
            lo, hi = e.evidence["interval_exact"]
            st["region"][e.evidence["param"]] = [str(Fraction(lo)), str(Fraction(hi))]
        else:
            raise CertifyError(f"unknown ledger action {e.action!r}")
    return states


# ---------------------------------------------------------------------------
# Context presets (the shaded parameter bands of the delivery study)
# ---------------------------------------------------------------------------

SUBURBAN_P1 = (Fraction(0), Fraction(3, 20))      # p1 in [0, 0.15]
URBAN_P1 = (Fraction(1, 10), Fraction(1, 4))      # p1 in [0.10, 0.25]


def suburban_context(scenario: GridScenario, p2=(0, 1)) -> ContextSpec:
    region = ParameterRegion({"p1": SUBURBAN_P1, "p2": p2})
    return ContextSpec("suburban", scenario, region)


def urban_context(scenario: GridScenario, p2=(0, 1)) -> ContextSpec:
    region = ParameterRegion({"p1": URBAN_P1, "p2": p2})
    return ContextSpec("urban", scenario, region)
