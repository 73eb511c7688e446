"""Levi-Civita connection, curvature, traces and Einstein residuals.

Index conventions (coordinate frame, ``d_i`` the coordinate derivations):

* ``nabla_{d_i} d_j = Gamma^k_ij d_k``
* ``R(d_i, d_j) d_l = R^k_lij d_k`` with
  ``R^k_lij = d_i Gamma^k_jl - d_j Gamma^k_il + Gamma^k_im Gamma^m_jl - Gamma^k_jm Gamma^m_il``
* ``Ric_ij = sum_k R^k_ikj``
* ``r = tr(calR)`` where ``calR(X) = sharp(iota_X Ric)``

With signature ``(+,-,-,-)`` these give ``Ric = g/a^2`` on a round 2-sphere of
radius ``a`` and ``Ric = -(3/alpha^2) g`` on the static de Sitter patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import sympy as sp

from .expr import DEFAULT_SEED, ExprError, ZeroVerdict, parse, simplify, zero_verdict
from .lorentz import Covector, Derivation, Metric, sharp

Tensor = tuple  # nested tuples of sympy expressions


class AxiomError(ExprError):
    """A computed object failed one of its defining identities."""


def _nest(fn, n: int, depth: int):
    if depth == 1:
        return tuple(fn(i) for i in range(n))
    return tuple(_nest(lambda *rest, i=i: fn(i, *rest), n, depth - 1) for i in range(n))


def _identically_zero(exprs, g: Metric, what: str, *, samples: int = 50) -> ZeroVerdict:
    verdict = zero_verdict(list(exprs), g.chart, samples=samples)
    if not verdict.is_zero:
        raise AxiomError(f"{what} failed: residual {verdict.max_residual:.3e} at {verdict.witness}")
    return verdict


@dataclass(frozen=True)
class Connection:
    chart: object
    gamma: Tensor  # gamma[k][i][j] = Gamma^k_ij
    axioms: dict = field(default_factory=dict, compare=False)

    def covariant(self, X: Derivation, Y: Derivation) -> Derivation:
        """``(nabla_X Y)^k = X(Y^k) + Gamma^k_ij X^i Y^j``."""
        n = len(self.gamma)
        comps = []
        for k in range(n):
            s = X(Y.components[k])
            for i in range(n):
                for j in range(n):
                    if self.gamma[k][i][j] != 0:
                        s += self.gamma[k][i][j] * X.components[i] * Y.components[j]
            comps.append(s)
        return Derivation(X.chart, tuple(comps))

    def as_array(self) -> np.ndarray:
        return np.array(self.gamma, dtype=object)


def koszul_lowered(g: Metric) -> Tensor:
    """``Gamma_lij = g(nabla_{d_i} d_j, d_l)``, read off from the Koszul identity on coordinate fields."""
    n, s, m = g.dim, g.chart.symbols, g.matrix
    return _nest(lambda l, i, j: (sp.diff(m[j, l], s[i]) + sp.diff(m[i, l], s[j]) - sp.diff(m[i, j], s[l])) / 2, n, 3)


def torsion_residuals(conn: Connection) -> list[sp.Expr]:
    n = len(conn.gamma)
    return [conn.gamma[k][i][j] - conn.gamma[k][j][i] for k in range(n) for i in range(n) for j in range(i + 1, n)]


def compatibility_residuals(g: Metric, conn: Connection) -> list[sp.Expr]:
    """``d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il`` for all ``k`` and ``i <= j``."""
    n, s, G = g.dim, g.chart.symbols, conn.gamma
    out = []
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                r = sp.diff(g[i, j], s[k])
                for l in range(n):
                    r -= G[l][k][i] * g[l, j] + G[l][k][j] * g[i, l]
                out.append(r)
    return out


def levi_civita(g: Metric, *, verify: bool = True) -> Connection:
    """Christoffel symbols from the Koszul formula, raised with ``sharp``.

    When ``verify`` is set both defining axioms are re-checked and the
    verdicts are stored in ``Connection.axioms``.
    """
    n = g.dim
    low = koszul_lowered(g)
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            raised = sharp(g, Covector(g.chart, tuple(low[l][i][j] for l in range(n))))
            for k in range(n):
                gamma[k][i][j] = gamma[k][j][i] = simplify(raised.components[k])
    conn = Connection(g.chart, tuple(tuple(tuple(r) for r in plane) for plane in gamma))
    if verify:
        conn.axioms["torsion"] = _identically_zero(torsion_residuals(conn), g, "torsion-free axiom")
        conn.axioms["metric"] = _identically_zero(compatibility_residuals(g, conn), g, "metric compatibility")
    return conn


@dataclass
class CurvatureData:
    metric: Metric
    connection: Connection
    riemann: Tensor | None = None   # riemann[k][l][i][j] = R^k_lij
    ricci: Tensor | None = None
    scalar: sp.Expr | None = None
    checks: dict = field(default_factory=dict)


def riemann(g: Metric, conn: Connection, *, check: bool = True) -> CurvatureData:
    n, s, G = g.dim, g.chart.symbols, conn.gamma

    def raw(k, l, i, j):
        e = sp.diff(G[k][j][l], s[i]) - sp.diff(G[k][i][l], s[j])
        for m in range(n):
            e += G[k][i][m] * G[m][j][l] - G[k][j][m] * G[m][i][l]
        return e

    R = [[[[sp.Integer(0)] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for l in range(n):
            for i in range(n):
                for j in range(i + 1, n):
                    e = raw(k, l, i, j)
                    if check and sp.expand(e + raw(k, l, j, i)) != 0:
                        raise AxiomError(f"antisymmetry failed for R^{k}_{l}{i}{j}")
                    e = simplify(e)
                    R[k][l][i][j], R[k][l][j][i] = e, -e
    data = CurvatureData(g, conn, riemann=tuple(tuple(tuple(tuple(c) for c in b) for b in a) for a in R))
    if check:
        data.checks["antisymmetry"] = ZeroVerdict("symbolic-zero", 0.0, 0)
    return data


def bianchi_residuals(data: CurvatureData) -> list[sp.Expr]:
    """``R^k_lij + R^k_ijl + R^k_jli`` for distinct ``l, i, j``."""
    R, n = data.riemann, len(data.riemann)
    out = []
    for k in range(n):
        for l in range(n):
            for i in range(n):
                for j in range(i + 1, n):
                    if len({l, i, j}) == 3 and l < i:
                        out.append(R[k][l][i][j] + R[k][i][j][l] + R[k][j][l][i])
    return out


def ricci(data: CurvatureData, *, check: bool = True) -> CurvatureData:
    R, g = data.riemann, data.metric
    n = g.dim
    ric = _nest(lambda i, j: simplify(sum((R[k][i][k][j] for k in range(n)), sp.Integer(0))), n, 2)
    if check:
        data.checks["ricci-symmetry"] = _identically_zero(
            [ric[i][j] - ric[j][i] for i in range(n) for j in range(i + 1, n)], g, "Ricci symmetry")
    data.ricci = ric
    return data


def ricci_operator(data: CurvatureData, X: Derivation) -> Derivation:
    """``calR(X) = sharp(iota_X Ric)``."""
    n = data.metric.dim
    ric = data.ricci
    w = Covector(X.chart, tuple(sum((X.components[i] * ric[i][j] for i in range(n)), sp.Integer(0))
                                for j in range(n)))
    return sharp(data.metric, w)


def ricci_form(data: CurvatureData, X: Derivation, Y: Derivation) -> sp.Expr:
    n = data.metric.dim
    return sum((data.ricci[i][j] * X.components[i] * Y.components[j] for i in range(n) for j in range(n)),
               sp.Integer(0))


def random_fields(chart, count: int, seed: int = DEFAULT_SEED) -> list[Derivation]:
    """Derivations with small random integer polynomial components (degree <= 1)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        comps = []
        for _ in range(chart.dim):
            c = [int(v) for v in rng.integers(-3, 4, chart.dim + 1)]
            comps.append(c[0] + sum(ci * s for ci, s in zip(c[1:], chart.symbols)))
        out.append(Derivation(chart, tuple(comps)))
    return out


def scalar_curvature(data: CurvatureData, *, check: bool = True, seed: int = DEFAULT_SEED) -> CurvatureData:
    g = data.metric
    n = g.dim
    trace = sp.Integer(0)
    for i in range(n):
        trace += ricci_operator(data, Derivation.coordinate(g.chart, i)).components[i]
    data.scalar = simplify(trace)
    if check:
        X, Y = random_fields(g.chart, 2, seed)
        data.checks["trace-identity"] = _identically_zero(
            [g(ricci_operator(data, X), Y) - ricci_form(data, X, Y)], g, "g(calR X, Y) = Ric(X, Y)")
    return data


def curvature(g: Metric, *, check: bool = True) -> CurvatureData:
    """Full pipeline: connection, Riemann, Ricci, scalar curvature."""
    conn = levi_civita(g, verify=check)
    data = riemann(g, conn, check=check)
    ricci(data, check=check)
    scalar_curvature(data, check=check)
    if check:
        data.checks.update(conn.axioms)
    return data


# --------------------------------------------------------------------------
# Einstein equations

FORMS = ("i", "ii")


@dataclass(frozen=True)
class EinsteinVerdict:
    form: str
    cosmological: sp.Expr
    residual: Tensor
    verdict: ZeroVerdict

    @property
    def holds(self) -> bool:
        return self.verdict.is_zero


def parse_tensor(g: Metric, T) -> sp.ImmutableMatrix:
    n = g.dim
    if T is None:
        return sp.ImmutableMatrix.zeros(n, n)
    rows = [list(r) for r in T]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"energy-momentum tensor must be {n}x{n}")
    return sp.ImmutableMatrix([[parse(c, g.chart) if isinstance(c, str) else sp.sympify(c) for c in r] for r in rows])


def einstein_residual(data: CurvatureData, lam, T=None, form: str = "ii") -> sp.ImmutableMatrix:
    """``Ric - r g/2 + Lambda g - 8 pi T`` (form i) or ``Ric - Lambda g`` (form ii)."""
    g = data.metric
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    lam = parse(lam, g.chart) if isinstance(lam, str) else sp.sympify(lam)
    ric = sp.ImmutableMatrix(data.ricci)
    if form == "ii":
        if T is not None and any(c != 0 for c in parse_tensor(g, T)):
            raise ValueError("form ii is the vacuum equation and takes no energy-momentum tensor")
        return ric - lam * g.matrix
    return ric - data.scalar * g.matrix / 2 + lam * g.matrix - 8 * sp.pi * parse_tensor(g, T)


def einstein_check(g: Metric, lam=0, T=None, form: str = "ii", *, numeric_only: bool = False,
                   samples: int = 200, tol: float = 1e-9, seed: int = DEFAULT_SEED,
                   data: CurvatureData | None = None) -> EinsteinVerdict:
    if data is None:
        data = curvature(g)
    res = einstein_residual(data, lam, T, form)
    n = g.dim
    upper = [res[i, j] for i in range(n) for j in range(i, n)]
    verdict = zero_verdict(upper, g.chart, samples=samples, tol=tol, seed=seed, numeric_only=numeric_only)
    lam_e = parse(lam, g.chart) if isinstance(lam, str) else sp.sympify(lam)
    return EinsteinVerdict(form, lam_e, tuple(tuple(res[i, j] for j in range(n)) for i in range(n)), verdict)


def component_table(tensor: Sequence, names: Sequence[str]) -> list[tuple[str, sp.Expr]]:
    """Flatten a nested tensor into ``(index label, component)`` pairs, skipping zeros."""
    out = []

    def walk(t, idx):
        if isinstance(t, (tuple, list)):
            for i, sub in enumerate(t):
                walk(sub, idx + (names[i],))
        elif t != 0:
            out.append((",".join(idx), t))

    walk(tensor, ())
    return out
