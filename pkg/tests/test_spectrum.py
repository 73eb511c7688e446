import pytest
import sympy as sp

from eaw.algebra import GrassmannElement, WeilElement
from eaw.expr import Chart, ExprError, symbol
from eaw.spectrum import (
    ALL_EXPRESSIONS,
    CoordinateAlgebra,
    GrassmannFunctionAlgebra,
    GrassmannStage,
    QuotientAlgebra,
    RealStage,
    UnsupportedPresentation,
    WeilAlgebra,
    ghost_ideal,
    grassmann_stage_point,
    morphism_defects,
    real_spectrum,
    sc_closure,
    stage_points,
    theta_image,
)

x = symbol("x")


def nullspace_oracle(relations, probe_points, basis):
    """Kernel of evaluation at the given real points, by plain matrix algebra."""
    M = sp.Matrix([[b.subs(x, p) for b in basis] for p in probe_points]) if probe_points else sp.zeros(0, len(basis))
    if not probe_points:
        return [sp.eye(len(basis))[:, j] for j in range(len(basis))]
    return M.nullspace()


def test_dual_numbers_have_one_real_point():
    W = WeilAlgebra(1)
    pts = real_spectrum(W)
    assert len(pts) == 1 and pts[0].label == "π"
    a, b = sp.symbols("a b", real=True)
    assert pts[0](WeilElement((a, b))) == a


def test_dual_numbers_ghost_is_epsilon():
    rep = ghost_ideal(WeilAlgebra(1))
    assert not rep.geometric
    assert [k.coeffs for k in rep.kernel_basis] == [(0, 1)]
    assert rep.to_dict()["kernel_basis"] == ["e"]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_weil_algebra_is_geometric_at_its_own_stage(k):
    assert ghost_ideal(WeilAlgebra(k), WeilAlgebra(k)).geometric


def test_lower_weil_stage_misses_top_nilpotent():
    rep = ghost_ideal(WeilAlgebra(2), WeilAlgebra(1))
    assert not rep.geometric
    assert [k.coeffs for k in rep.kernel_basis] == [(0, 0, 1)]


@pytest.mark.parametrize("relation, points, kernel_dim", [
    ("x^2", [0], 1),
    ("x^2 - 1", [-1, 1], 0),
    ("x^2 + 1", [], 2),
])
def test_quotient_kernels_match_matrix_oracle(relation, points, kernel_dim):
    C = QuotientAlgebra(("x",), (relation,))
    assert [p.images for p in real_spectrum(C)] == [(sp.Integer(p),) for p in points]
    oracle = nullspace_oracle(relation, points, list(C.basis))
    rep = ghost_ideal(C)
    assert len(rep.kernel_basis) == len(oracle) == kernel_dim
    got = sp.Matrix([[c for c in C.coordinates(k)] for k in rep.kernel_basis]) if rep.kernel_basis else None
    if got is not None:
        want = sp.Matrix.hstack(*oracle).T
        assert got.rank() == want.rank() == sp.Matrix.vstack(got, want).rank()


def test_nilpotent_quotient_becomes_geometric_at_weil_stage():
    C = QuotientAlgebra(("x",), ("x^2",))
    assert ghost_ideal(C).kernel_basis == [x]
    assert ghost_ideal(C, WeilAlgebra(1)).geometric


def test_empty_spectrum_quotient_stays_non_geometric():
    C = QuotientAlgebra(("x",), ("x^2 + 1",))
    assert not ghost_ideal(C, WeilAlgebra(1)).geometric


def test_infinite_quotient_is_rejected():
    with pytest.raises(UnsupportedPresentation):
        QuotientAlgebra(("x", "y"), ("x*y",)).basis


def test_irrational_relation_is_rejected():
    with pytest.raises(UnsupportedPresentation):
        QuotientAlgebra(("x",), ("x^2 - pi",))


def test_theta_image_table():
    C = QuotientAlgebra(("x",), ("x^2 - 1",))
    table = theta_image(C, x + 3).table()
    assert table == {"x↦-1": 2, "x↦1": 4}


def test_coordinate_algebra_is_geometric_at_real_and_weil_stages():
    C = CoordinateAlgebra(Chart(("x", "y"), ((-1, 1), (-1, 1))), 8)
    for stage in (RealStage(), WeilAlgebra(1), WeilAlgebra(3)):
        assert ghost_ideal(C, stage).geometric


def test_grassmann_functions_are_not_geometric_at_real_stage():
    chart = Chart(("x",), ((-1, 1),))
    rep = ghost_ideal(GrassmannFunctionAlgebra(chart, 2, 8), RealStage())
    assert not rep.geometric
    assert rep.witness is not None and "g" in rep.witness


def test_grassmann_stage_point_is_multiplicative():
    chart = Chart(("x", "y"))
    a = GrassmannElement.generator(1, 3)
    chi = grassmann_stage_point({"x": sp.Rational(1, 2), "y": 2}, (1, -1), a, chart)
    f, g = x ** 2 + symbol("y"), sp.sin(x) * symbol("y")
    defects = morphism_defects(chi, f, g)
    assert all(sp.simplify(c) == 0 for _, c in defects["multiplicative"].terms)
    assert all(sp.simplify(c) == 0 for _, c in defects["additive"].terms)


def test_grassmann_stage_point_needs_nilpotent():
    with pytest.raises(ValueError):
        grassmann_stage_point({"x": 0}, (1,), GrassmannElement.scalar(1, 2), Chart(("x",)))


def test_jet_points_are_multiplicative_up_to_float_rounding():
    # grid base points are floats, so defects sit at machine precision
    C = CoordinateAlgebra(Chart(("x", "y"), ((-1, 1), (-1, 1))), 4)
    f, g = sp.exp(x) * symbol("y"), x - symbol("y") ** 2
    for pt in stage_points(C, WeilAlgebra(2), max_points=5):
        mul = morphism_defects(pt, f, g)["multiplicative"]
        assert all(abs(float(c)) < 1e-14 for c in mul.coeffs)


def test_even_grassmann_stage_uses_pairs():
    assert [n.terms for n in GrassmannStage(3, True).nilpotents()] == [((0b011, 1),), ((0b101, 1),), ((0b110, 1),)]


def test_sc_closure():
    assert sc_closure(ALL_EXPRESSIONS).closed
    finite = sc_closure([x], ("sin",), depth=2)
    assert not finite.closed
    assert sp.sin(sp.sin(x)) in finite.closure
    with pytest.raises(ExprError):
        sc_closure([x], ("sqrt_of_nothing",))
