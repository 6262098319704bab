import random
from fractions import Fraction

import numpy as np
import pytest

from pmdpcert.expr import (
    Const,
    ExprParseError,
    MissingParameter,
    ParameterRegion,
    Product,
    Sum,
    Var,
    check_distribution_row,
    evaluate,
    evaluate_float,
    expand,
    expr_to_string,
    is_multi_affine,
    one_minus,
    parse_expr,
    scaled,
)

F = Fraction


def test_evaluate_identity():
    assert evaluate(Var("p1"), {"p1": F(1, 2)}) == F(1, 2)


def test_evaluate_one_minus():
    expr = Sum((Const(1), Product((Const(-1), Var("p1")))))
    assert evaluate(expr, {"p1": F(3, 10)}) == F(7, 10)


def test_evaluate_product_hand_fold():
    # p1 * (1 - p2) at (1/10, 2/5) = (1/10)*(3/5) = 3/50
    expr = Product((Var("p1"), one_minus(Var("p2"))))
    assert evaluate(expr, {"p1": F(1, 10), "p2": F(2, 5)}) == F(3, 50)


def test_evaluate_missing_parameter():
    with pytest.raises(MissingParameter):
        evaluate(Var("p2"), {"p1": F(1, 2)})


def test_multi_affine_const():
    assert is_multi_affine(Const(F(1, 2)))


def test_multi_affine_square_rejected():
    assert not is_multi_affine(Product((Var("p1"), Var("p1"))))


def test_multi_affine_distinct_vars():
    assert is_multi_affine(Product((Var("p1"), Var("p2"))))


def test_multi_affine_cancellation():
    # (p1 - p1) * p1 expands to 0, which is degree 0.
    diff = Sum((Var("p1"), Product((Const(-1), Var("p1")))))
    assert is_multi_affine(Product((diff, Var("p1"))))
    assert expand(Product((diff, Var("p1")))) == {}


def test_row_simple_pass():
    region = ParameterRegion({"p1": (0, 1)})
    wf = check_distribution_row([Var("p1"), one_minus(Var("p1"))], region)
    assert wf.ok


def test_row_non_unit_sum():
    region = ParameterRegion({"p1": (0, 1)})
    bad = Sum((Const(1), Product((Const(-2), Var("p1")))))  # 1 - 2*p1
    wf = check_distribution_row([Var("p1"), bad], region)
    assert not wf.ok
    assert "NonUnitSum" in wf.kinds()


def test_row_negative_at_corner():
    region = ParameterRegion({"p1": (0, 1)})
    # p1 + (1-2*p1) + p1 = 1 symbolically, but 1-2*p1 < 0 at p1 = 1.
    mid = Sum((Const(1), Product((Const(-2), Var("p1")))))
    wf = check_distribution_row([Var("p1"), mid, Var("p1")], region)
    assert not wf.ok
    assert "NegativeAtCorner" in wf.kinds()


def test_row_two_parameter_pass():
    region = ParameterRegion({"p1": (0, 1), "p2": (0, 1)})
    p1, p2 = Var("p1"), Var("p2")
    row = [Product((p1, one_minus(p2))), Product((p1, p2)), one_minus(p1)]
    wf = check_distribution_row(row, region)
    assert wf.ok


def test_row_rejects_non_multi_affine():
    region = ParameterRegion({"p1": (0, 1)})
    wf = check_distribution_row([Product((Var("p1"), Var("p1")))], region)
    assert wf.kinds() == ("NotMultiAffine",)


def _random_multi_affine(rng, names):
    """Random multi-affine expression: sum of monomials over distinct vars."""
    terms = []
    for _ in range(rng.randint(1, 4)):
        coef = Const(F(rng.randint(-8, 8), rng.randint(1, 8)))
        chosen = rng.sample(names, rng.randint(0, len(names)))
        factors = [coef] + [Var(n) for n in chosen]
        terms.append(Product(tuple(factors)) if len(factors) > 1 else coef)
    return Sum(tuple(terms)) if len(terms) > 1 else terms[0]


def _eval_array(expr, arrays):
    if isinstance(expr, Const):
        return float(expr.value)
    if isinstance(expr, Var):
        return arrays[expr.name]
    if isinstance(expr, Sum):
        out = 0.0
        for t in expr.terms:
            out = out + _eval_array(t, arrays)
        return out
    out = 1.0
    for f in expr.factors:
        out = out * _eval_array(f, arrays)
    return out


def test_multi_affine_box_extremality():
    # 1000 random expressions in <= 3 parameters: interior values stay inside
    # the corner envelope.
    rng = random.Random(91)
    npts = 1000
    for _ in range(1000):
        names = ["p1", "p2", "p3"][: rng.randint(1, 3)]
        expr = _random_multi_affine(rng, names)
        assert is_multi_affine(expr)
        box = {}
        for n in names:
            a, b = sorted((F(rng.randint(0, 100), 100), F(rng.randint(0, 100), 100)))
            box[n] = (a, b)
        region = ParameterRegion(box)
        corner_vals = [float(evaluate(expr, c)) for c in region.corners()]
        lo, hi = min(corner_vals), max(corner_vals)
        arrays = {}
        np_rng = np.random.default_rng(rng.randint(0, 2**31))
        for n in names:
            a, b = float(box[n][0]), float(box[n][1])
            arrays[n] = a + np_rng.random(npts) * (b - a)
        vals = np.asarray(_eval_array(expr, arrays))
        assert vals.min() >= lo - 1e-12
        assert vals.max() <= hi + 1e-12


def test_rational_vs_float_evaluation():
    rng = random.Random(7)
    for _ in range(300):
        expr = _random_multi_affine(rng, ["p1", "p2"])
        v = {"p1": F(rng.randint(0, 100), 100), "p2": F(rng.randint(0, 100), 100)}
        exact = float(evaluate(expr, v))
        approx = evaluate_float(expr, v)
        assert abs(exact - approx) < 1e-12


def test_row_pass_implies_instantiated_rows_valid():
    region = ParameterRegion({"p1": (0, 1), "p2": (0, 1)})
    p1, p2 = Var("p1"), Var("p2")
    row = [Product((p1, one_minus(p2))), Product((p1, p2)), one_minus(p1)]
    assert check_distribution_row(row, region).ok
    rng = np.random.default_rng(5)
    for _ in range(1000):
        v = {"p1": F(float(rng.random())), "p2": F(float(rng.random()))}
        vals = [float(evaluate(e, v)) for e in row]
        assert abs(sum(vals) - 1.0) < 1e-12
        assert all(0.0 <= x <= 1.0 for x in vals)


def test_parse_basic():
    assert evaluate(parse_expr("p1*(1-p2)"), {"p1": F(1, 10), "p2": F(2, 5)}) == F(3, 50)


def test_parse_precedence():
    # multiplication binds tighter than subtraction
    assert evaluate(parse_expr("1-p1*p2"), {"p1": F(1, 2), "p2": F(1, 2)}) == F(3, 4)


def test_parse_rational_and_decimal_literals():
    assert evaluate(parse_expr("3/20"), {}) == F(3, 20)
    assert evaluate(parse_expr("0.15"), {}) == F(3, 20)
    assert evaluate(parse_expr("-0.5 + 1"), {}) == F(1, 2)


def test_parse_errors():
    for bad in ("", "p1 +", "1..2", "p1 @ p2", "(p1", "1/"):
        with pytest.raises(ExprParseError):
            parse_expr(bad)


def test_to_string_round_trip():
    rng = random.Random(3)
    for _ in range(200):
        expr = _random_multi_affine(rng, ["p1", "p2"])
        back = parse_expr(expr_to_string(expr))
        assert expand(back) == expand(expr)


def test_scaled_shares_shape():
    assert expr_to_string(scaled(Var("p1"), F(1, 5))) == "p1*1/5"
    assert evaluate(parse_expr("p1*1/5"), {"p1": F(1, 2)}) == F(1, 10)


def test_region_validation():
    with pytest.raises(ValueError):
        ParameterRegion({"p1": (F(1, 2), F(1, 4))})
    with pytest.raises(ValueError):
        ParameterRegion({"p1": (0, 2)})


def test_region_corners_degenerate():
    r = ParameterRegion({"p1": (F(1, 4), F(1, 4)), "p2": (0, 1)})
    corners = list(r.corners())
    assert len(corners) == 2
    assert all(c["p1"] == F(1, 4) for c in corners)
