"""Parameter-space exploration: instantiate-check loops with CSV emission.

Sampling is fully deterministic given the spec (seeds included), and every
sampled valuation is fixed up front, so implementations may solve samples
concurrently without changing the output order or bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .checker import (
    NonConvergence,
    Policy,
    SolverConfig,
    UntilProperty,
    evaluate_policy_detailed,
    max_until,
)
from .expr import ParameterRegion
from .model import PMDP, instantiate


class SweepError(Exception):
    pass


class MalformedCsv(SweepError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class GridMode:
    points_per_dim: int

    def __post_init__(self):
        if self.points_per_dim < 1:
            raise ValueError("points_per_dim must be >= 1")


@dataclass(frozen=True)
class RandomMode:
    count: int
    seed: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class TiedMode:
    """All named parameters share one swept value (the p1 = p2 assumption).

    seed None draws an endpoint-inclusive lattice; otherwise uniform samples.
    """

    params: tuple
    lo: Fraction
    hi: Fraction
    count: int
    seed: int = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(sorted(self.params)))
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not self.params:
            raise ValueError("tied mode needs at least one parameter")
        if self.lo > self.hi:
            raise ValueError("tied range is empty")


@dataclass(frozen=True)
class SweepSpec:
    mode: object
    region: ParameterRegion
    solver: SolverConfig = SolverConfig()


@dataclass(frozen=True)
class SampleRecord:
    valuation: dict          # name -> Fraction
    value: float
    iterations: int
    residual: float

    def floats(self) -> dict:
        return {k: float(v) for k, v in self.valuation.items()}


@dataclass(frozen=True)
class SweepResult:
    records: tuple
    tied: tuple = ()  # tied parameter names when the sweep was 1-D tied

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    @property
    def argmin(self) -> dict:
        return self.records[int(self.values.argmin())].floats()

    @property
    def argmax(self) -> dict:
        return self.records[int(self.values.argmax())].floats()

    def param_names(self) -> tuple:
        return tuple(sorted(self.records[0].valuation)) if self.records else ()

    def summary(self) -> dict:
        return {
            "min": self.min,
            "argmin": self.argmin,
            "max": self.max,
            "argmax": self.argmax,
            "samples": len(self.records),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _lattice(lo: Fraction, hi: Fraction, points: int) -> list:
    if lo == hi or points == 1:
        return [lo]
    step = (hi - lo) / (points - 1)
    return [lo + i * step for i in range(points)]


def sample_valuations(spec: SweepSpec) -> list:
    """Materialize the full sample list (exact rationals), in output order."""
    names = spec.region.names
    mode = spec.mode

    if isinstance(mode, GridMode):
        axes = [_lattice(*spec.region.bounds[n], mode.points_per_dim) for n in names]
        out = []
        idx = [0] * len(axes)
        total = 1
        for ax in axes:
            total *= len(ax)
        for flat in range(total):
            val, rem = {}, flat
            for d in range(len(axes) - 1, -1, -1):
                rem, i = divmod(rem, len(axes[d]))
                val[names[d]] = axes[d][i]
            out.append(val)
        return out

    if isinstance(mode, RandomMode):
        rng = np.random.default_rng(mode.seed)
        u = rng.random((mode.count, len(names)))
        out = []
        for i in range(mode.count):
            val = {}
            for d, n in enumerate(names):
                lo, hi = spec.region.bounds[n]
                val[n] = lo + Fraction(float(u[i, d])) * (hi - lo)
            out.append(val)
        return out

    if isinstance(mode, TiedMode):
        for n in mode.params:
            if n not in spec.region.bounds:
                raise ValueError(f"tied parameter {n!r} missing from region")
            lo, hi = spec.region.bounds[n]
            if mode.lo < lo or mode.hi > hi:
                raise ValueError(f"tied range exceeds region interval for {n!r}")
        fixed = {}
        for n in names:
            if n not in mode.params:
                lo, hi = spec.region.bounds[n]
                if lo != hi:
                    raise ValueError(
                        f"non-tied parameter {n!r} must have a degenerate interval")
                fixed[n] = lo
        if mode.seed is None:
            points = _lattice(mode.lo, mode.hi, mode.count)
        else:
            rng = np.random.default_rng(mode.seed)
            u = rng.random(mode.count)
            points = [mode.lo + Fraction(float(x)) * (mode.hi - mode.lo) for x in u]
        out = []
        for p in points:
            val = dict(fixed)
            for n in mode.params:
                val[n] = p
            out.append(val)
        return out

    raise TypeError(f"unknown sweep mode {mode!r}")


def _tied_names(spec: SweepSpec) -> tuple:
    return spec.mode.params if isinstance(spec.mode, TiedMode) else ()


def run_sweep(m: PMDP, prop: UntilProperty, spec: SweepSpec) -> SweepResult:
    """Synthesize the optimal value at every sampled valuation."""
    if not spec.region.subset_of(m.region):
        raise ValueError("sweep region is not contained in the model region")
    records = []
    for v in sample_valuations(spec):
        c = instantiate(m, v)
        try:
            res = max_until(c, prop, spec.solver)
        except NonConvergence as exc:
            raise NonConvergence(exc.iterations, exc.residual, valuation=v) from exc
        records.append(SampleRecord(dict(v), res.value_at_initial,
                                    res.iterations, res.residual))
    return SweepResult(tuple(records), tied=_tied_names(spec))


def evaluate_fixed_policy_sweep(m: PMDP, pol: Policy, prop: UntilProperty,
                                spec: SweepSpec) -> SweepResult:
    """Evaluate one fixed policy across the sampled valuations."""
    if not spec.region.subset_of(m.region):
        raise ValueError("sweep region is not contained in the model region")
    records = []
    for v in sample_valuations(spec):
        c = instantiate(m, v)
        try:
            value, iters, residual = evaluate_policy_detailed(c, pol, prop, spec.solver)
        except NonConvergence as exc:
            raise NonConvergence(exc.iterations, exc.residual, valuation=v) from exc
        records.append(SampleRecord(dict(v), value, iters, residual))
    return SweepResult(tuple(records), tied=_tied_names(spec))


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------
# Columns are `p1[,p2],value` ('.'-decimal, repr precision, header row). Tied
# sweeps collapse their parameters into one column whose header joins the
# tied names with '=' (e.g. "p1=p2"), which read_csv expands back.

def to_csv(result: SweepResult) -> str:
    if not result.records:
        raise SweepError("refusing to serialize an empty sweep")
    if result.tied:
        header = ["=".join(result.tied)]
        tied = set(result.tied)
        extra = [n for n in result.records[0].valuation if n not in tied]
        if extra:
            header = sorted(extra) + header  # fixed params first, tied last
    else:
        header = list(result.param_names())
    lines = [",".join(header + ["value"])]
    for r in result.records:
        cells = []
        for col in header:
            name = col.split("=")[0]
            cells.append(repr(float(r.valuation[name])))
        cells.append(repr(r.value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(result: SweepResult, path) -> None:
    data = to_csv(result)
    with open(path, "w", newline="") as f:
        f.write(data)


def read_csv(path) -> SweepResult:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise MalformedCsv(0, "empty file")
    header = lines[0].split(",")
    if header[-1] != "value" or len(header) < 2:
        raise MalformedCsv(1, "header must be 'p1[,p2],value'")
    cols = header[:-1]
    tied = tuple(cols[-1].split("=")) if "=" in cols[-1] else ()
    if not any(line.strip() for line in lines[1:]):
        raise MalformedCsv(1, "no data rows")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise MalformedCsv(i, f"expected {len(header)} columns, found {len(cells)}")
        try:
            valuation = {}
            for col, cell in zip(cols, cells):
                for name in col.split("="):
                    valuation[name] = Fraction(float(cell))
            value = float(cells[-1])
        except ValueError as exc:
            raise MalformedCsv(i, str(exc)) from exc
        records.append(SampleRecord(valuation, value, 0, 0.0))
    return SweepResult(tuple(records), tied=tied)
