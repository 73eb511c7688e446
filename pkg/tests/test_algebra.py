import itertools
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from eaw.algebra import (
    AlgebraError,
    GrassmannElement,
    Parity,
    WeilElement,
    center,
    center_excess,
    dense_mul,
    even_basis,
    format_grassmann,
    format_weil,
    from_dense,
    grassmann_function,
    parity,
    parse_grassmann,
    parse_weil,
    to_dense,
    weil_apply,
    weil_evaluate,
)
from eaw.expr import Chart, ExprError, symbol

fractions = st.fractions(min_value=-5, max_value=5, max_denominator=12)


def weil(order):
    return st.lists(fractions, min_size=order + 1, max_size=order + 1).map(lambda c: WeilElement(tuple(c)))


def grassmann(q):
    return st.lists(st.integers(-4, 4), min_size=1 << q, max_size=1 << q).map(
        lambda cs: GrassmannElement(q, tuple(enumerate(cs))))


# ---- Weil ----

def test_dual_number_product():
    x, y, u, v = sp.symbols("x y u v")
    p = WeilElement((x, y)) * WeilElement((u, v))
    assert p.coeffs[0] == x * u
    assert sp.expand(p.coeffs[1] - (u * y + v * x)) == 0


def test_square_of_one_plus_epsilon():
    assert (WeilElement((1, 1)) ** 2).coeffs == (1, 2)


def test_inverse_at_order_two():
    assert (WeilElement((1, 1, 1)) * WeilElement((1, -1, 0))).coeffs == (1, 0, 0)


def test_epsilon_is_nilpotent():
    e = WeilElement.epsilon(3)
    assert (e ** 4).coeffs == (0, 0, 0, 0)
    assert (e ** 3).coeffs == (0, 0, 0, 1)


def test_order_mismatch():
    with pytest.raises(AlgebraError):
        WeilElement((1, 1)) * WeilElement((1, 1, 1))


def test_non_invertible():
    with pytest.raises(ZeroDivisionError):
        WeilElement((0, 1)).inverse()


def test_primitive_lift_is_taylor_expansion():
    w = weil_apply("exp", WeilElement((0, 1, 0)))
    assert w.coeffs == (1, 1, sp.Rational(1, 2))


def test_log_needs_positive_real_part():
    with pytest.raises(ExprError):
        weil_apply("log", WeilElement((0, 1)))


def test_weil_evaluate_polynomial():
    x = symbol("x")
    w = weil_evaluate(x ** 2, {x: WeilElement((3, 1))}, 1)
    assert w.coeffs == (9, 6)


def test_weil_text_round_trip():
    for text in ("1 + 2*e - e^2", "-e", "1/2 - 1/4*e^2", "0"):
        w = parse_weil(text, 2)
        assert parse_weil(format_weil(w), 2) == w
    assert format_weil(parse_weil("1 + 2*e - e^2", 2)) == "1 + 2*e - e^2"


@given(weil(2), weil(2), weil(2))
def test_weil_ring_laws(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * b == b * a
    assert a * (b + c) == a * b + a * c


@given(weil(3))
def test_weil_inverse(a):
    if a.real_part == 0:
        return
    assert (a * a.inverse()).coeffs == (1, 0, 0, 0)


@given(weil(2), weil(2))
def test_smoothness_law_for_sin(a, b):
    # sin(a + b) computed through the library agrees with the addition formula
    lhs = weil_apply("sin", a + b)
    rhs = weil_apply("sin", a) * weil_apply("cos", b) + weil_apply("cos", a) * weil_apply("sin", b)
    assert all(sp.simplify(sp.expand_trig(sp.sympify(p - q))) == 0 for p, q in zip(lhs.coeffs, rhs.coeffs))


# ---- Grassmann ----

def g(i, q=3):
    return GrassmannElement.generator(i, q)


def test_generators_anticommute():
    assert g(2) * g(1) == -(g(1) * g(2))
    assert (g(1) * g(1)).terms == ()


def test_product_of_units():
    lhs = (1 + g(1)) * (1 + g(2)) * (1 - g(1) * g(2))
    assert lhs == 1 + g(1) + g(2)


def test_parity_classification():
    assert parity(g(1) * g(2)) is Parity.EVEN
    assert parity(g(3)) is Parity.ODD
    assert parity(1 + g(1)) is Parity.NONHOMOGENEOUS


def test_text_round_trip():
    a = parse_grassmann("-1 - g1^g2 + 3*g3", 3)
    assert format_grassmann(a) == "-1 - g1^g2 + 3*g3"
    assert parse_grassmann(format_grassmann(a), 3) == a


def test_generator_out_of_range():
    with pytest.raises(AlgebraError):
        GrassmannElement.monomial(0b1000, 3)


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_supercommutativity_on_all_basis_pairs(q):
    basis = [GrassmannElement.monomial(m, q) for m in range(1 << q)]
    for a, b in itertools.product(basis, repeat=2):
        sign = (-1) ** (parity(a).alpha * parity(b).alpha)
        assert a * b == b * a * sign


@given(grassmann(4), grassmann(4), grassmann(4))
def test_grassmann_associative_and_distributive(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@given(grassmann(4), grassmann(4))
def test_dense_kernel_matches_sparse_product(a, b):
    assert from_dense(dense_mul(to_dense(a), to_dense(b), 4), 4) == a * b


@pytest.mark.parametrize("q", [2, 4, 6])
def test_center_is_even_part_for_even_q(q):
    assert {x.terms for x in center(q)} == {x.terms for x in even_basis(q)}


@pytest.mark.parametrize("q", [1, 3, 5])
def test_center_gains_top_monomial_for_odd_q(q):
    # oracle: direct commutation with every generator
    top = GrassmannElement.monomial((1 << q) - 1, q)
    assert [x.terms for x in center_excess(q)] == [top.terms]
    for i in range(1, q + 1):
        assert top * g(i, q) == g(i, q) * top


def test_grassmann_function_evaluation():
    chart = Chart(("x",))
    f = grassmann_function({(): "x", (1, 2): "x^2"}, chart, 2)
    val = f.at({"x": 2})
    assert val == GrassmannElement(2, ((0, 2), (0b11, 4)))
    assert f.body == symbol("x")


def test_grassmann_function_product_uses_sign_rule():
    chart = Chart(("x",))
    a = grassmann_function({(1,): "x"}, chart, 2)
    b = grassmann_function({(2,): "1"}, chart, 2)
    assert (a * b).element == -(b * a).element


def test_fraction_coefficients_stay_exact():
    a = GrassmannElement(2, ((0, Fraction(1, 3)), (1, Fraction(1, 2))))
    assert (a * a).coefficient(0) == sp.Rational(1, 9)
