"""Parametric MDP representation, validation, and instantiation.

States are dense integers (the scenario module owns the decode back to
gridworld tuples). A PMDP is immutable once built; instantiation at a
valuation is a pure function producing a sparse float64 ConcreteMDP, with
zero-probability edges dropped so that graph algorithms and the numeric
model agree at boundary valuations like p1 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .expr import (
    ParameterRegion,
    check_distribution_row,
    evaluate,
    expr_to_string,
    parse_expr,
    variables,
)


class ModelError(Exception):
    """Base class for model-level failures."""


class ValuationOutOfRegion(ModelError):
    def __init__(self, valuation, region):
        super().__init__(f"valuation {valuation} lies outside region {region.bounds}")
        self.valuation = valuation


class MalformedModelFile(ModelError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class ParametricDistribution:
    """Sparse symbolic distribution: list of (target state, expression)."""

    support: tuple

    def __init__(self, support):
        object.__setattr__(self, "support", tuple(support))


@dataclass(frozen=True)
class PMDP:
    state_count: int
    initial: int
    enabled: tuple          # per state: tuple of ParametricDistribution (index = ActionId)
    labels: dict            # name -> frozenset of state ids
    parameters: frozenset   # parameter names
    region: ParameterRegion

    def __init__(self, state_count, initial, enabled, labels, region, parameters=None):
        object.__setattr__(self, "state_count", int(state_count))
        object.__setattr__(self, "initial", int(initial))
        object.__setattr__(self, "enabled",
                           tuple(tuple(dists) for dists in enabled))
        object.__setattr__(self, "labels",
                           {k: frozenset(v) for k, v in labels.items()})
        if parameters is None:
            parameters = set()
            for dists in enabled:
                for d in dists:
                    for _, e in d.support:
                        parameters |= variables(e)
        object.__setattr__(self, "parameters", frozenset(parameters))
        object.__setattr__(self, "region", region)

    def label_mask(self, name: str) -> np.ndarray:
        mask = np.zeros(self.state_count, dtype=bool)
        mask[list(self.labels.get(name, ()))] = True
        return mask


@dataclass(frozen=True)
class Finding:
    kind: str
    detail: str
    state: int = -1
    action: int = -1


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    def kinds(self) -> tuple:
        return tuple(f.kind for f in self.findings)


def validate(m: PMDP) -> ValidationReport:
    """Report every violated invariant; an empty report means the model is valid."""
    findings = []

    if not (0 <= m.initial < m.state_count):
        findings.append(Finding("InitialOutOfRange",
                                f"initial state {m.initial} not in [0, {m.state_count})"))
    if len(m.enabled) != m.state_count:
        findings.append(Finding("EnabledLengthMismatch",
                                f"{len(m.enabled)} action lists for {m.state_count} states"))

    if "goal" not in m.labels:
        findings.append(Finding("MissingLabel", "label 'goal' is required"))
    overlap = m.labels.get("crash", frozenset()) & m.labels.get("goal", frozenset())
    if overlap:
        findings.append(Finding("LabelOverlap",
                                f"crash and goal overlap on {len(overlap)} states"))
    for name, states in m.labels.items():
        bad = [s for s in states if not (0 <= s < m.state_count)]
        if bad:
            findings.append(Finding("LabelOutOfRange",
                                    f"label {name!r} references out-of-range states {bad[:5]}"))

    for s, dists in enumerate(m.enabled):
        if not dists:
            findings.append(Finding("Deadlock", f"state {s} has no enabled action", state=s))
            continue
        for a, dist in enumerate(dists):
            targets = [t for t, _ in dist.support]
            if len(set(targets)) != len(targets):
                findings.append(Finding("DuplicateTarget",
                                        f"state {s} action {a} lists a target twice",
                                        state=s, action=a))
            out_of_range = [t for t in targets if not (0 <= t < m.state_count)]
            if out_of_range:
                findings.append(Finding("TargetOutOfRange",
                                        f"state {s} action {a} targets {out_of_range[:5]}",
                                        state=s, action=a))
            wf = check_distribution_row([e for _, e in dist.support], m.region)
            for f in wf.findings:
                findings.append(Finding(f.kind,
                                        f"state {s} action {a}: {f.detail}",
                                        state=s, action=a))

    return ValidationReport(tuple(findings))


# ---------------------------------------------------------------------------
# Concrete (instantiated) models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcreteMDP:
    """Sparse float64 MDP in flattened CSR-like form.

    act_ptr[s]:act_ptr[s+1] indexes the state's action rows; row k spans
    row_ptr[k]:row_ptr[k+1] in cols/probs. Rows sum to 1 within 1e-9.
    """

    state_count: int
    initial: int
    act_ptr: np.ndarray     # int64, len = state_count + 1
    row_ptr: np.ndarray     # int64, len = act_ptr[-1] + 1
    cols: np.ndarray        # int64, len = nnz
    probs: np.ndarray       # float64, len = nnz
    labels: dict            # name -> bool ndarray of len state_count

    ROW_SUM_TOL = 1e-9

    def __post_init__(self):
        for arr in (self.act_ptr, self.row_ptr, self.cols, self.probs):
            arr.setflags(write=False)
        for mask in self.labels.values():
            mask.setflags(write=False)

    @property
    def pair_count(self) -> int:
        return len(self.row_ptr) - 1

    def actions_of(self, state: int) -> range:
        return range(self.act_ptr[state], self.act_ptr[state + 1])

    def row(self, pair: int):
        lo, hi = self.row_ptr[pair], self.row_ptr[pair + 1]
        return self.cols[lo:hi], self.probs[lo:hi]

    def label_mask(self, name: str) -> np.ndarray:
        if name not in self.labels:
            raise UnknownLabel(name)
        return self.labels[name]

    def check_rows(self) -> tuple:
        """(max |row sum - 1|, min entry, max entry) over all rows."""
        sums = np.add.reduceat(self.probs, self.row_ptr[:-1])
        return (float(np.abs(sums - 1.0).max()),
                float(self.probs.min()),
                float(self.probs.max()))


class UnknownLabel(ModelError):
    def __init__(self, name):
        super().__init__(f"model has no label {name!r}")
        self.name = name


class _CompiledPMDP:
    """Flattened symbolic form with deduplicated expressions.

    Scenario models reuse a handful of distinct expressions across tens of
    thousands of edges, so instantiation reduces to evaluating each distinct
    expression once and scattering with NumPy.
    """

    def __init__(self, m: PMDP):
        act_ptr = [0]
        row_ptr = [0]
        cols = []
        expr_ids = []
        uniq: dict = {}
        uniq_list = []
        for dists in m.enabled:
            for dist in dists:
                for t, e in dist.support:
                    key = e
                    idx = uniq.get(key)
                    if idx is None:
                        idx = len(uniq_list)
                        uniq[key] = idx
                        uniq_list.append(e)
                    cols.append(t)
                    expr_ids.append(idx)
                row_ptr.append(len(cols))
            act_ptr.append(len(row_ptr) - 1)
        self.act_ptr = np.asarray(act_ptr, dtype=np.int64)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.expr_ids = np.asarray(expr_ids, dtype=np.int64)
        self.unique_exprs = uniq_list


_COMPILED_CACHE: dict = {}


def _compiled(m: PMDP) -> _CompiledPMDP:
    key = id(m)
    hit = _COMPILED_CACHE.get(key)
    if hit is None or hit[0] is not m:
        hit = (m, _CompiledPMDP(m))
        _COMPILED_CACHE[key] = hit
    return hit[1]


def instantiate(m: PMDP, valuation: dict) -> ConcreteMDP:
    """Substitute the valuation into every edge expression (exactly, then to
    float64) and drop zero-probability edges."""
    if not m.region.contains(valuation):
        raise ValuationOutOfRegion(valuation, m.region)
    comp = _compiled(m)

    values = np.empty(len(comp.unique_exprs), dtype=np.float64)
    for i, e in enumerate(comp.unique_exprs):
        values[i] = float(evaluate(e, valuation))
    probs = values[comp.expr_ids]

    keep = probs != 0.0
    if keep.all():
        cols, probs_kept = comp.cols.copy(), probs
        row_ptr = comp.row_ptr.copy()
    else:
        cols = comp.cols[keep]
        probs_kept = probs[keep]
        kept_per_row = np.add.reduceat(keep.astype(np.int64), comp.row_ptr[:-1]) \
            if len(comp.cols) else np.zeros(len(comp.row_ptr) - 1, dtype=np.int64)
        row_ptr = np.concatenate(([0], np.cumsum(kept_per_row)))

    labels = {name: m.label_mask(name) for name in m.labels}
    c = ConcreteMDP(
        state_count=m.state_count,
        initial=m.initial,
        act_ptr=comp.act_ptr.copy(),
        row_ptr=row_ptr.astype(np.int64),
        cols=cols,
        probs=probs_kept,
        labels=labels,
    )
    err, lo, hi = c.check_rows()
    if err > ConcreteMDP.ROW_SUM_TOL or lo < 0.0 or hi > 1.0:
        raise ModelError(
            f"instantiation produced an invalid row (sum error {err:g}, range [{lo:g}, {hi:g}])")
    return c


def instantiate_exact(m: PMDP, valuation: dict) -> list:
    """Exact-rational instantiation: per state, list of rows of (target, Fraction).

    Slow path used by audits and test oracles; zero edges are dropped to stay
    aligned with instantiate().
    """
    if not m.region.contains(valuation):
        raise ValuationOutOfRegion(valuation, m.region)
    out = []
    for dists in m.enabled:
        rows = []
        for dist in dists:
            row = []
            for t, e in dist.support:
                p = evaluate(e, valuation)
                if p != 0:
                    row.append((t, p))
            rows.append(row)
        out.append(rows)
    return out


# ---------------------------------------------------------------------------
# Explicit-state text dump (debugging / cross-checking interface)
# ---------------------------------------------------------------------------

def write_explicit(m: PMDP, f) -> None:
    """One line per transition: `state action target expr`, then a #labels section."""
    f.write(f"#pmdp states={m.state_count} initial={m.initial}\n")
    f.write(f"#region {_region_to_str(m.region)}\n")
    for s, dists in enumerate(m.enabled):
        for a, dist in enumerate(dists):
            for t, e in dist.support:
                f.write(f"{s} {a} {t} {expr_to_string(e)}\n")
    f.write("#labels\n")
    for name in sorted(m.labels):
        ids = " ".join(str(s) for s in sorted(m.labels[name]))
        f.write(f"{name}: {ids}\n")


def read_explicit(f) -> PMDP:
    """Inverse of write_explicit."""
    state_count = initial = None
    region = None
    rows: dict = {}
    labels: dict = {}
    in_labels = False
    for line_no, raw in enumerate(f, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#pmdp"):
            for part in line.split()[1:]:
                k, v = part.split("=")
                if k == "states":
                    state_count = int(v)
                elif k == "initial":
                    initial = int(v)
            continue
        if line.startswith("#region"):
            region = _region_from_str(line[len("#region"):].strip())
            continue
        if line.startswith("#labels"):
            in_labels = True
            continue
        if in_labels:
            if ":" not in line:
                raise MalformedModelFile(line_no, "label line must be 'name: ids'")
            name, ids = line.split(":", 1)
            labels[name.strip()] = frozenset(int(x) for x in ids.split())
            continue
        parts = line.split(None, 3)
        if len(parts) != 4:
            raise MalformedModelFile(line_no, "expected 'state action target expr'")
        s, a, t = int(parts[0]), int(parts[1]), int(parts[2])
        rows.setdefault(s, {}).setdefault(a, []).append((t, parse_expr(parts[3])))
    if state_count is None or region is None:
        raise MalformedModelFile(0, "missing #pmdp or #region header")
    enabled = []
    for s in range(state_count):
        acts = rows.get(s, {})
        enabled.append(tuple(ParametricDistribution(acts[a]) for a in sorted(acts)))
    return PMDP(state_count, initial, enabled, labels, region)


def _region_to_str(region: ParameterRegion) -> str:
    parts = []
    for name in region.names:
        lo, hi = region.bounds[name]
        parts.append(f"{name}=[{lo},{hi}]")
    return " ".join(parts)


def _region_from_str(text: str) -> ParameterRegion:
    bounds = {}
    for part in text.split():
        name, interval = part.split("=")
        lo, hi = interval.strip("[]").split(",")
        bounds[name] = (Fraction(lo), Fraction(hi))
    return ParameterRegion(bounds)
