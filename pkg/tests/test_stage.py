import numpy as np
import pytest
import sympy as sp

from eaw.algebra import WeilElement
from eaw.expr import Chart, DomainError, symbol
from eaw.lorentz import Derivation
from eaw.spectrum import CoordinateAlgebra, QuotientAlgebra, RealStage, WeilAlgebra
from eaw.stage import (
    central_difference_slope,
    hat_iso_check,
    hat_morphism_residual,
    jet_morphism_check,
    lift_to_weil,
    lifts_agree,
    parametrized_space,
    random_function,
    random_jet_point,
    restriction_recovers,
    staged_metric_identity,
    theta_iso_check,
    transport_metric,
    weil_ladder,
    weil_stage_point,
)

line = Chart(("x",), ((-2, 2),))
plane = Chart(("x", "y"), ((-2, 2), (-2, 2)))
x, y = symbol("x"), symbol("y")


def test_square_lifts_to_value_plus_slope():
    pt = weil_stage_point(line, {"x": 3}, (1,))
    assert lift_to_weil(x ** 2, 1)(pt) == WeilElement((9, 6))


def test_sine_at_second_order():
    pt = weil_stage_point(line, {"x": 0}, (1,), order=2)
    assert lift_to_weil(sp.sin(x), 2)(pt) == WeilElement((0, 1, 0))
    assert lift_to_weil(sp.cos(x), 2)(pt) == WeilElement((1, 0, sp.Rational(-1, 2)))


def test_higher_jets_enter_at_second_order():
    # curve x = t + t^2, so x^2 = t^2 + O(t^3)
    pt = weil_stage_point(line, {"x": 0}, (1,), order=2, higher=[(1,)])
    assert lift_to_weil(x ** 2, 2)(pt) == WeilElement((0, 0, 1))
    assert lift_to_weil(x, 2)(pt) == WeilElement((0, 1, 1))


def test_lift_order_must_match():
    with pytest.raises(ValueError):
        lift_to_weil(x, 2)(weil_stage_point(line, {"x": 0}, (1,)))
    with pytest.raises(ValueError):
        lift_to_weil(x, 1, "magic")


@pytest.mark.parametrize("k", [1, 2, 3])
def test_algebraic_and_taylor_lifts_agree(k):
    rng = np.random.default_rng(11)
    for _ in range(6):
        f = random_function(plane, rng)
        assert lifts_agree(f, random_jet_point(plane, k, rng))


def test_central_difference_matches_slope():
    pt = weil_stage_point(plane, {"x": sp.Rational(1, 3), "y": sp.Rational(-1, 2)}, (2, -1))
    f = sp.exp(x / 4) * sp.cos(x - y)
    slope = float(lift_to_weil(f, 1)(pt).coeffs[1])
    assert abs(slope - central_difference_slope(f, pt)) < 1e-8


def test_transported_schwarzschild_time_norm(catalog_metric):
    g = catalog_metric("schwarzschild")
    gbar = transport_metric(g, 1)
    dt = Derivation.coordinate(g.chart, 0)
    pt = weil_stage_point(g.chart, {"t": 0, "r": 4, "θ": 1, "φ": 0}, (0, 1, 0, 0), params={"M": 1})
    # 1 - 2M/r at r = 4 + e with M = 1
    assert gbar(dt, dt, pt) == WeilElement((sp.Rational(1, 2), sp.Rational(1, 8)))
    assert gbar.lifted_scalar(dt, dt, pt) == gbar(dt, dt, pt)


@pytest.mark.parametrize("k", [1, 2])
def test_staged_metric_identity_holds(catalog_metric, k):
    rep = staged_metric_identity(catalog_metric("de_sitter"), k, draws=10, seed=4)
    assert rep.passed and rep.draws == 10 and rep.max_residual == 0


def test_jet_morphism_small_run():
    rep = jet_morphism_check(plane, 1, draws=50, seed=2)
    assert rep.passed, rep.failures[:3]
    assert rep.max_residual < 1e-6


def test_theta_iso_on_coordinate_algebra():
    rep = theta_iso_check(CoordinateAlgebra(plane, 8), 2)
    assert rep.precondition and rep.isomorphic_onto_image and rep.morphism_ok


def test_theta_iso_precondition_failure_is_reported():
    rep = theta_iso_check(QuotientAlgebra(("x",), ("x^2",)), 1)
    assert not rep.precondition and rep.isomorphic_onto_image is None
    assert "does not apply" in rep.notes[0]


def test_theta_iso_on_two_points():
    rep = theta_iso_check(QuotientAlgebra(("x",), ("x^2 - 1",)), 3)
    assert rep.precondition and rep.isomorphic_onto_image and rep.kernels_equal


def test_weil_ladder():
    assert weil_ladder(2) == [RealStage(), WeilAlgebra(1), WeilAlgebra(2)]


# ---- parametrized points ----

def test_unit_circle_hat_of_radius_is_one():
    space = parametrized_space(plane, 16, {"unit": ["cos(p)", "sin(p)"]})
    vals = space.hat(x ** 2 + y ** 2)(space.loops["unit"])
    assert np.allclose(vals, 1.0, rtol=0, atol=1e-15)


def test_constant_restriction_recovers_exactly():
    space = parametrized_space(plane, 12, density=6)
    for f in (x, x * y, sp.sin(x) + y ** 3):
        assert restriction_recovers(space, f)


def test_hat_is_a_homomorphism_on_loops():
    space = parametrized_space(plane, 32, {"u": ["cos(p)", "sin(p)"], "e": ["1.5*cos(p)", "0.5*sin(2*p)"]})
    assert hat_morphism_residual(space, sp.sin(x) * y, sp.exp(y) - x) <= 1e-12


def test_hat_iso_passes_with_separating_generators():
    space = parametrized_space(plane, 16, {"u": ["cos(p)", "sin(p)"]})
    rep = hat_iso_check(space, ["x", "y", "x*y"])
    assert rep.passed and rep.collisions == []


def test_colliding_generators_are_reported():
    # the two-point grid sits at x = 1 and x = 3, where both generators agree
    space = parametrized_space(Chart(("x",), ((0, 4),)), 8, density=2)
    rep = hat_iso_check(space, ["x", "x + (x - 1)*(x - 3)"])
    assert not rep.injective and "refine the grid" in rep.collisions[0]["hint"]


def test_non_separating_generators_are_reported():
    space = parametrized_space(plane, 8, density=4)
    rep = hat_iso_check(space, ["x^2"])
    assert not rep.injective and rep.collisions


def test_loop_outside_chart_is_rejected():
    with pytest.raises(DomainError, match="leaves the chart"):
        parametrized_space(plane, 8, {"big": ["3*cos(p)", "sin(p)"]})
