import math

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from eaw.expr import (
    Chart,
    DomainError,
    ParseError,
    UnboundSymbolError,
    UnknownSymbolError,
    compile_numeric,
    differentiate,
    evaluate,
    parse,
    parse_with_domain,
    simplify,
    simplify_with_notes,
    symbol,
    zero_verdict,
)

SCH = Chart(("t", "r", "θ", "φ"), ((0, 1), ("2.5*M", "20*M"), (0.1, 3.04), (0, 6.28)), (("M", 0.5, 2.0),))
XY = Chart(("x", "y"), ((-2, 2), (-2, 2)))


def test_parse_and_differentiate_schwarzschild_potential():
    f = parse("1 - 2*M/r", SCH)
    assert simplify(differentiate(f, "r") - 2 * symbol("M") / symbol("r") ** 2) == 0


def test_decimal_literals_are_exact():
    assert parse("0.5*x", XY) == sp.Rational(1, 2) * symbol("x")


def test_unary_minus_binds_looser_than_power():
    assert parse("-x^2", XY) == -symbol("x") ** 2


def test_unknown_function_reports_byte_offset():
    with pytest.raises(UnknownSymbolError) as info:
        parse("foo(r)", SCH)
    assert info.value.offset == 0


def test_offsets_count_utf8_bytes():
    with pytest.raises(ParseError) as info:
        parse("θ + # r", SCH)
    assert info.value.offset == 5


def test_unknown_name():
    with pytest.raises(UnknownSymbolError):
        parse("x + q", XY)


def test_division_by_literal_zero():
    with pytest.raises(DomainError):
        parse("x/0", XY)


def test_cancelled_divisor_is_noted():
    res = parse_with_domain("x/x", XY)
    assert res.expr == 1
    assert res.nonzero == (symbol("x"),)


def test_divisor_notes_for_rational_functions():
    res = parse_with_domain("1/(1 - 2*M/r)", SCH)
    assert res.nonzero


def test_pythagoras_simplifies():
    assert simplify(parse("sin(θ)^2 + cos(θ)^2", SCH)) == 1


def test_double_angle_is_normalised():
    e = parse("(sin(2*θ) - 2*cos(2*θ)*tan(θ))/(2*tan(θ))", SCH)
    assert simplify(e) == sp.sin(symbol("θ")) ** 2


def test_rational_cancellation():
    assert simplify(parse("r*(1 - 2*M/r) - r + 2*M", SCH)) == 0


def test_simplify_is_idempotent():
    e = parse("(x^2 - y^2)/(x - y) + sin(x)^2", XY)
    once = simplify(e)
    assert simplify(once) == once


def test_simplify_with_notes_reports_dropped_denominator():
    x = symbol("x")
    notes = simplify_with_notes((x ** 2 - x) / x)
    assert notes.expr == x - 1
    assert x in notes.nonzero


def test_evaluate():
    assert evaluate(parse("1 - 2*M/r", SCH), {"r": 4}, {"M": 1}) == 0.5


def test_evaluate_unbound():
    with pytest.raises(UnboundSymbolError):
        evaluate(parse("x + y", XY), {"x": 1})


def test_evaluate_log_domain():
    with pytest.raises(DomainError):
        evaluate(parse("log(x)", XY), {"x": -1, "y": 0})


def test_zero_verdict_kinds():
    assert zero_verdict(parse("x - x", XY), XY).kind == "symbolic-zero"
    v = zero_verdict(parse("x*y", XY), XY)
    assert v.kind == "nonzero" and v.witness is not None
    v = zero_verdict(parse("sin(x)^2 + cos(x)^2 - 1", XY), XY, numeric_only=True)
    assert v.kind == "numeric-zero" and v.samples == 200


def test_chart_samples_respect_parameter_dependent_ranges():
    pts, prm = SCH.sample(500, seed=1)
    assert ((pts[:, 1] > 2.5 * prm[:, 0]) & (pts[:, 1] < 20 * prm[:, 0])).all()


def test_chart_grid_is_cell_centred():
    g = XY.grid(4)
    assert g.shape == (16, 2)
    assert sorted(set(g[:, 0])) == [-1.5, -0.5, 0.5, 1.5]


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_compiled_matches_tree_evaluation(x, y):
    e = parse("exp(x/3)*cos(y) + atan(x*y) - sqrt(1 + x^2)", XY)
    fast = compile_numeric(e, XY)([[x, y]])[0]
    assert math.isclose(fast, evaluate(e, {"x": x, "y": y}), rel_tol=1e-12, abs_tol=1e-12)


@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(1, 4))
def test_derivative_of_product_obeys_leibniz(a, b, n):
    x = symbol("x")
    f, g = a * x ** n + 1, sp.sin(b * x)
    lhs = differentiate(f * g, "x")
    rhs = differentiate(f, "x") * g + f * differentiate(g, "x")
    assert simplify(lhs - rhs) == 0
