"""Multi-affine symbolic expressions over named transition-probability parameters.

Expressions are trees of Const/Var/Sum/Product restricted to multi-affine form
(degree <= 1 in each parameter separately). That restriction is what makes
box-validity decidable by corner enumeration: a multi-affine function attains
its extrema over a parameter box at the box corners.

All symbolic work (evaluation, expansion, corner checks) is exact rational
arithmetic; floats appear only when a caller converts results for the numeric
solver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

Rational = Fraction


class ExprError(Exception):
    """Base class for expression-level failures."""


class MissingParameter(ExprError):
    def __init__(self, name: str):
        super().__init__(f"valuation does not assign parameter {name!r}")
        self.name = name


class ExprParseError(ExprError):
    def __init__(self, text: str, pos: int, reason: str):
        super().__init__(f"cannot parse {text!r} at position {pos}: {reason}")
        self.text = text
        self.pos = pos


# ---------------------------------------------------------------------------
# Expression tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Rational

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("parameter name must be nonempty")


@dataclass(frozen=True)
class Sum:
    terms: tuple

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))


@dataclass(frozen=True)
class Product:
    factors: tuple

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))


ParamExpr = Union[Const, Var, Sum, Product]


def variables(expr: ParamExpr) -> frozenset:
    """Set of parameter names appearing in the tree."""
    if isinstance(expr, Const):
        return frozenset()
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    children = expr.terms if isinstance(expr, Sum) else expr.factors
    out = frozenset()
    for c in children:
        out |= variables(c)
    return out


def evaluate(expr: ParamExpr, valuation: dict) -> Fraction:
    """Exact rational fold of the tree under a {name: rational} assignment.

    Raises MissingParameter for any Var leaf the valuation does not cover.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        if expr.name not in valuation:
            raise MissingParameter(expr.name)
        return Fraction(valuation[expr.name])
    if isinstance(expr, Sum):
        acc = Fraction(0)
        for t in expr.terms:
            acc += evaluate(t, valuation)
        return acc
    acc = Fraction(1)
    for f in expr.factors:
        acc *= evaluate(f, valuation)
    return acc


def evaluate_float(expr: ParamExpr, valuation: dict) -> float:
    """Float fold with the same tree shape; used by tests to pin rounding."""
    if isinstance(expr, Const):
        return float(expr.value)
    if isinstance(expr, Var):
        if expr.name not in valuation:
            raise MissingParameter(expr.name)
        return float(valuation[expr.name])
    if isinstance(expr, Sum):
        return sum(evaluate_float(t, valuation) for t in expr.terms)
    acc = 1.0
    for f in expr.factors:
        acc *= evaluate_float(f, valuation)
    return acc


# ---------------------------------------------------------------------------
# Expansion into a canonical multilinear polynomial
# ---------------------------------------------------------------------------
# A polynomial is a dict mapping a monomial to its rational coefficient.
# Monomials are tuples of (name, exponent) sorted by name; the empty tuple is
# the constant term. Zero coefficients are dropped, so cancellation is exact.

def _poly_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for mono, coef in b.items():
        s = out.get(mono, Fraction(0)) + coef
        if s:
            out[mono] = s
        else:
            out.pop(mono, None)
    return out


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    deg: dict = {}
    for name, e in itertools.chain(m1, m2):
        deg[name] = deg.get(name, 0) + e
    return tuple(sorted(deg.items()))


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            mono = _mono_mul(m1, m2)
            s = out.get(mono, Fraction(0)) + c1 * c2
            if s:
                out[mono] = s
            else:
                out.pop(mono, None)
    return out


def expand(expr: ParamExpr) -> dict:
    """Canonical expanded polynomial of the tree (exact, with cancellation)."""
    if isinstance(expr, Const):
        return {(): expr.value} if expr.value else {}
    if isinstance(expr, Var):
        return {((expr.name, 1),): Fraction(1)}
    if isinstance(expr, Sum):
        out: dict = {}
        for t in expr.terms:
            out = _poly_add(out, expand(t))
        return out
    out = {(): Fraction(1)}
    for f in expr.factors:
        out = _poly_mul(out, expand(f))
    return out


def is_multi_affine(expr: ParamExpr) -> bool:
    """True iff every parameter has degree <= 1 after exact expansion."""
    for mono in expand(expr):
        if any(e > 1 for _, e in mono):
            return False
    return True


def poly_to_string(poly: dict) -> str:
    """Readable form of an expanded polynomial, for diagnostics."""
    if not poly:
        return "0"
    parts = []
    for mono, coef in sorted(poly.items()):
        names = "*".join(n if e == 1 else f"{n}^{e}" for n, e in mono)
        if not names:
            parts.append(str(coef))
        elif coef == 1:
            parts.append(names)
        else:
            parts.append(f"{coef}*{names}")
    return " + ".join(parts)


# ---------------------------------------------------------------------------
# Parameter regions and row well-formedness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterRegion:
    """Closed box of parameter values; one [lo, hi] interval per parameter.

    Parameters are transition probabilities, so bounds live in [0, 1].
    """

    bounds: dict = field(default_factory=dict)

    def __init__(self, bounds: dict):
        norm = {}
        for name, (lo, hi) in bounds.items():
            lo, hi = Fraction(lo), Fraction(hi)
            if not (0 <= lo <= hi <= 1):
                raise ValueError(
                    f"interval for {name!r} must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
            norm[name] = (lo, hi)
        object.__setattr__(self, "bounds", norm)

    @property
    def names(self) -> tuple:
        return tuple(sorted(self.bounds))

    def contains(self, valuation: dict) -> bool:
        for name, (lo, hi) in self.bounds.items():
            if name not in valuation:
                return False
            v = Fraction(valuation[name])
            if not (lo <= v <= hi):
                return False
        return True

    def subset_of(self, other: "ParameterRegion") -> bool:
        for name, (lo, hi) in self.bounds.items():
            if name not in other.bounds:
                return False
            olo, ohi = other.bounds[name]
            if lo < olo or hi > ohi:
                return False
        return True

    def corners(self):
        """All box corners as valuations (degenerate intervals contribute one value)."""
        names = self.names
        choices = []
        for n in names:
            lo, hi = self.bounds[n]
            choices.append((lo,) if lo == hi else (lo, hi))
        for combo in itertools.product(*choices):
            yield dict(zip(names, combo))

    def with_interval(self, name: str, lo, hi) -> "ParameterRegion":
        new = {k: v for k, v in self.bounds.items()}
        new[name] = (Fraction(lo), Fraction(hi))
        return ParameterRegion(new)


@dataclass(frozen=True)
class RowFinding:
    kind: str          # "NotMultiAffine" | "NonUnitSum" | "NegativeAtCorner"
    detail: str
    index: int = -1    # offending expression index, where applicable
    corner: dict = None


@dataclass(frozen=True)
class WellFormedness:
    ok: bool
    findings: tuple = ()

    def kinds(self) -> tuple:
        return tuple(f.kind for f in self.findings)


def check_distribution_row(exprs, region: ParameterRegion) -> WellFormedness:
    """Decide whether a symbolic row is a probability distribution on a box.

    PASS iff (a) the expanded sum of the row is the constant 1, and (b) every
    entry is within [0, 1] at every corner of the region. By multi-affine
    extremality, (b) at the corners is sufficient for the whole box.
    """
    findings = []
    for i, e in enumerate(exprs):
        if not is_multi_affine(e):
            findings.append(RowFinding("NotMultiAffine",
                                       f"expression {i} has a parameter of degree > 1",
                                       index=i))
    if findings:
        return WellFormedness(False, tuple(findings))

    total: dict = {}
    for e in exprs:
        total = _poly_add(total, expand(e))
    if total != {(): Fraction(1)}:
        residual = _poly_add(total, {(): Fraction(-1)})
        findings.append(RowFinding("NonUnitSum",
                                   f"row sums to 1 + ({poly_to_string(residual)})"))

    for corner in region.corners():
        for i, e in enumerate(exprs):
            v = evaluate(e, corner)
            if v < 0 or v > 1:
                findings.append(RowFinding(
                    "NegativeAtCorner",
                    f"expression {i} evaluates to {v} at corner {corner}",
                    index=i, corner=dict(corner)))

    return WellFormedness(not findings, tuple(findings))


# ---------------------------------------------------------------------------
# Concrete-syntax parser:  + - *  over names and decimal/rational literals
# ---------------------------------------------------------------------------

def parse_expr(text: str) -> ParamExpr:
    """Parse an arithmetic string like "p1*(1-p2)" with standard precedence.

    Literals may be decimals ("0.15") or rationals ("3/20"); both are read
    exactly. Division is only allowed inside a literal.
    """
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos][0] if pos < len(tokens) else None

    def take(kind):
        nonlocal pos
        if pos >= len(tokens):
            raise ExprParseError(text, len(text), f"expected {kind}, found end of input")
        tok = tokens[pos]
        if tok[0] != kind:
            raise ExprParseError(text, tok[2], f"expected {kind}, found {tok[0]}")
        pos += 1
        return tok[1]

    def parse_sum():
        node = parse_term()
        terms = [node]
        while peek() in ("+", "-"):
            op = take(peek())
            rhs = parse_term()
            terms.append(rhs if op == "+" else Product((Const(Fraction(-1)), rhs)))
        return terms[0] if len(terms) == 1 else Sum(terms)

    def parse_term():
        factors = [parse_factor()]
        while peek() == "*":
            take("*")
            factors.append(parse_factor())
        return factors[0] if len(factors) == 1 else Product(factors)

    def parse_factor():
        kind = peek()
        if kind == "num":
            return Const(take("num"))
        if kind == "name":
            return Var(take("name"))
        if kind == "(":
            take("(")
            node = parse_sum()
            take(")")
            return node
        if kind == "-":
            take("-")
            return Product((Const(Fraction(-1)), parse_factor()))
        where = tokens[pos][2] if pos < len(tokens) else len(text)
        raise ExprParseError(text, where, "expected a number, name, or parenthesis")

    node = parse_sum()
    if pos != len(tokens):
        raise ExprParseError(text, tokens[pos][2], "trailing input")
    return node


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*()":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            num = text[i:j]
            if j < n and text[j] == "/":
                k = j + 1
                while k < n and text[k].isdigit():
                    k += 1
                if k == j + 1:
                    raise ExprParseError(text, j, "expected digits after '/'")
                value = Fraction(int(num)) / Fraction(int(text[j + 1:k]))
                tokens.append(("num", value, i))
                i = k
            else:
                try:
                    value = Fraction(num)
                except ValueError:
                    raise ExprParseError(text, i, f"bad numeric literal {num!r}") from None
                tokens.append(("num", value, i))
                i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExprParseError(text, i, f"unexpected character {ch!r}")
    if not tokens:
        raise ExprParseError(text, 0, "empty expression")
    return tokens


def expr_to_string(expr: ParamExpr) -> str:
    """Serialize back to the config syntax; parse_expr() round-trips it."""
    def render(e, parent):
        if isinstance(e, Const):
            v = e.value
            if v.denominator == 1:
                s = str(v.numerator)
            else:
                s = f"{v.numerator}/{v.denominator}"
            return f"({s})" if v < 0 and parent in ("*", "+") else s
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Sum):
            inner = "+".join(render(t, "+") for t in e.terms)
            return f"({inner})" if parent == "*" else inner
        inner = "*".join(render(f, "*") for f in e.factors)
        return inner

    return render(expr, None)


# Convenience constructors used heavily by the scenario builders.

def const(v) -> Const:
    return Const(Fraction(v))


def var(name: str) -> Var:
    return Var(name)


def one_minus(e: ParamExpr) -> Sum:
    return Sum((Const(Fraction(1)), Product((Const(Fraction(-1)), e))))


def scaled(e: ParamExpr, factor) -> ParamExpr:
    f = Fraction(factor)
    if f == 1:
        return e
    return Product((e, Const(f)))
