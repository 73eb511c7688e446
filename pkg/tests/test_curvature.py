"""Curvature pipeline against closed forms and the finite-difference oracle.

Frozen values below were produced by the oracle in ``eaw.numeric`` (which
never differentiates symbolically) and then matched to closed forms:
de Sitter ``Lambda * alpha^2 = -3.0000000`` (spread 1.2e-7 over 64 samples),
2-sphere ``r * a^2 = 2.0000000`` (spread 4e-9).
"""

import numpy as np
import pytest
import sympy as sp

from eaw.curvature import (
    bianchi_residuals,
    compatibility_residuals,
    curvature,
    einstein_check,
    einstein_residual,
    levi_civita,
    ricci_form,
    ricci_operator,
    torsion_residuals,
)
from eaw.expr import Chart, simplify, symbol
from eaw.lorentz import Derivation, Metric
from eaw.numeric import estimate_einstein_constant, evaluate_tensor, max_relative_error, numeric_curvature

DE_SITTER_LAMBDA_TIMES_ALPHA_SQUARED = -3.0
SPHERE_SCALAR_TIMES_A_SQUARED = 2.0

θ, r, M, a, α = (symbol(s) for s in ("θ", "r", "M", "a", "α"))
METRICS = ["minkowski", "schwarzschild", "de_sitter", "flrw_dust", "two_sphere"]


def is_zero(e):
    return simplify(e) == 0


def test_minkowski_is_flat(curvature_of):
    d = curvature_of("minkowski")
    assert all(c == 0 for plane in d.connection.gamma for row in plane for c in row)
    assert d.scalar == 0


def test_sphere_christoffels(curvature_of):
    G = curvature_of("two_sphere").connection.gamma
    assert is_zero(G[0][1][1] + sp.sin(2 * θ) / 2)
    assert is_zero(G[1][0][1] - sp.cos(θ) / sp.sin(θ))
    assert G[1][0][1] == G[1][1][0]
    assert G[0][0][0] == G[1][1][1] == 0


def test_sphere_riemann_ricci_scalar(curvature_of):
    d = curvature_of("two_sphere")
    g = d.metric
    assert is_zero(d.riemann[0][1][0][1] - sp.sin(θ) ** 2)
    assert all(is_zero(d.ricci[i][j] - g[i, j] / a ** 2) for i in range(2) for j in range(2))
    assert is_zero(d.scalar - SPHERE_SCALAR_TIMES_A_SQUARED / a ** 2)


def test_schwarzschild_time_christoffel(curvature_of):
    G = curvature_of("schwarzschild").connection.gamma
    assert is_zero(G[1][0][0] - (M * r - 2 * M ** 2) / r ** 3)
    assert is_zero(G[0][0][1] - M / (r * (r - 2 * M)))


@pytest.mark.parametrize("name", METRICS)
def test_levi_civita_axioms(catalog_metric, name):
    g = catalog_metric(name)
    conn = levi_civita(g, verify=False)
    assert all(is_zero(e) for e in torsion_residuals(conn))
    assert all(is_zero(e) for e in compatibility_residuals(g, conn))


@pytest.mark.parametrize("name", METRICS)
def test_first_bianchi_identity(curvature_of, name):
    assert all(is_zero(e) for e in bianchi_residuals(curvature_of(name)))


@pytest.mark.parametrize("name", METRICS)
def test_symbolic_matches_finite_difference_oracle(curvature_of, name):
    d = curvature_of(name)
    g = d.metric
    nc = numeric_curvature(g, 32, seed=7)
    scale = max(1.0, float(np.max(np.abs(nc.riemann))))
    assert max_relative_error(evaluate_tensor(d.connection.gamma, g, nc.points, nc.params), nc.gamma) < 1e-6
    assert max_relative_error(evaluate_tensor(d.riemann, g, nc.points, nc.params), nc.riemann, scale) < 1e-6
    assert max_relative_error(evaluate_tensor(d.ricci, g, nc.points, nc.params), nc.ricci, scale) < 1e-6


def test_oracle_determines_de_sitter_constant(catalog_metric):
    nc = numeric_curvature(catalog_metric("de_sitter"), 64)
    lam, misfit = estimate_einstein_constant(nc)
    assert misfit < 1e-6
    assert np.allclose(lam * nc.params[:, 0] ** 2, DE_SITTER_LAMBDA_TIMES_ALPHA_SQUARED, rtol=1e-6)


def test_de_sitter_is_einstein_with_frozen_constant(catalog_metric, curvature_of):
    g = catalog_metric("de_sitter")
    v = einstein_check(g, DE_SITTER_LAMBDA_TIMES_ALPHA_SQUARED / α ** 2, data=curvature_of("de_sitter"))
    assert v.holds and v.verdict.kind == "symbolic-zero"
    assert is_zero(curvature_of("de_sitter").scalar - 4 * DE_SITTER_LAMBDA_TIMES_ALPHA_SQUARED / α ** 2)


def test_de_sitter_rejects_opposite_sign(catalog_metric, curvature_of):
    v = einstein_check(catalog_metric("de_sitter"), 3 / α ** 2, data=curvature_of("de_sitter"))
    assert not v.holds and v.verdict.witness is not None


def test_schwarzschild_vacuum(catalog_metric, curvature_of):
    v = einstein_check(catalog_metric("schwarzschild"), 0, data=curvature_of("schwarzschild"))
    assert v.holds
    num = einstein_check(catalog_metric("schwarzschild"), 0, data=curvature_of("schwarzschild"), numeric_only=True)
    assert num.verdict.max_residual < 1e-9 and num.verdict.samples == 200


def test_flrw_dust_satisfies_full_equation(catalog_metric, curvature_of):
    from eaw.config import load_catalog_entry
    eq = load_catalog_entry("flrw_dust").equation
    v = einstein_check(catalog_metric("flrw_dust"), 0, eq.T, "i", data=curvature_of("flrw_dust"))
    assert v.holds
    assert not einstein_check(catalog_metric("flrw_dust"), 0, None, "i", data=curvature_of("flrw_dust")).holds


def test_einstein_tensor_of_sphere_vanishes(curvature_of):
    # in two dimensions Ric = r g / 2 identically
    res = einstein_residual(curvature_of("two_sphere"), 0, None, "i")
    assert all(is_zero(c) for c in res)


def test_vacuum_form_refuses_matter(curvature_of):
    with pytest.raises(ValueError):
        einstein_residual(curvature_of("minkowski"), 0, [["1", "0", "0", "0"]] + [["0"] * 4] * 3, "ii")


def test_tensor_shape_is_checked(curvature_of):
    with pytest.raises(ValueError):
        einstein_residual(curvature_of("minkowski"), 0, [["1", "0"], ["0", "1"]], "i")


def test_unknown_form(curvature_of):
    with pytest.raises(ValueError):
        einstein_residual(curvature_of("minkowski"), 0, None, "iii")


def test_ricci_operator_traces_through_metric(curvature_of):
    d = curvature_of("schwarzschild")
    X = Derivation.parse(d.metric.chart, ["1", "r", "0", "t"])
    Y = Derivation.parse(d.metric.chart, ["θ", "0", "1", "1"])
    assert is_zero(d.metric(ricci_operator(d, X), Y) - ricci_form(d, X, Y))


def test_covariant_derivative_of_coordinate_fields():
    chart = Chart(("x", "y"), ((0.5, 2), (0.5, 2)))
    g = Metric.from_strings(chart, ["1", "x^2"])
    conn = levi_civita(g)
    dy = Derivation.coordinate(chart, 1)
    # polar-like metric: nabla_y d_y = -x d_x
    assert conn.covariant(dy, dy).components == (-symbol("x"), 0)
    assert curvature(g).scalar == 0
