"""Derivation modules over a coordinate algebra with a symmetric metric.

Derivations live in the coordinate frame: ``X = sum X^i d_i`` with
expression-valued components.  Signature convention is ``(+, -, ..., -)``
with the first coordinate timelike.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .expr import DEFAULT_SEED, Chart, ExprError, ZeroVerdict, evaluate, parse, simplify, zero_verdict


class DegenerateMetricError(ExprError):
    pass


class ChartMismatchError(ExprError):
    pass


def _same_chart(a, b):
    if a.chart.coords != b.chart.coords:
        raise ChartMismatchError(f"charts differ: {a.chart.coords} vs {b.chart.coords}")


@dataclass(frozen=True)
class Derivation:
    """``X(f) = sum_i X^i df/dx^i``; satisfies the Leibniz rule by construction."""

    chart: Chart
    components: tuple

    def __post_init__(self):
        comps = tuple(sp.sympify(c) for c in self.components)
        if len(comps) != self.chart.dim:
            raise ValueError(f"expected {self.chart.dim} components, got {len(comps)}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def coordinate(cls, chart: Chart, i: int) -> "Derivation":
        return cls(chart, tuple(1 if j == i else 0 for j in range(chart.dim)))

    @classmethod
    def parse(cls, chart: Chart, texts: Sequence[str]) -> "Derivation":
        return cls(chart, tuple(parse(t, chart) for t in texts))

    def __call__(self, f) -> sp.Expr:
        return sum((c * sp.diff(f, s) for c, s in zip(self.components, self.chart.symbols) if c != 0),
                   sp.Integer(0))

    def __add__(self, other: "Derivation") -> "Derivation":
        _same_chart(self, other)
        return Derivation(self.chart, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "Derivation") -> "Derivation":
        _same_chart(self, other)
        return Derivation(self.chart, tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return Derivation(self.chart, tuple(-a for a in self.components))

    def scale(self, f) -> "Derivation":
        """Module action ``f X``."""
        return Derivation(self.chart, tuple(sp.sympify(f) * a for a in self.components))

    def simplify(self) -> "Derivation":
        return Derivation(self.chart, tuple(simplify(c) for c in self.components))


@dataclass(frozen=True)
class Covector:
    chart: Chart
    components: tuple

    def __post_init__(self):
        comps = tuple(sp.sympify(c) for c in self.components)
        if len(comps) != self.chart.dim:
            raise ValueError(f"expected {self.chart.dim} components, got {len(comps)}")
        object.__setattr__(self, "components", comps)

    def __call__(self, X: Derivation) -> sp.Expr:
        _same_chart(self, X)
        return sum((w * x for w, x in zip(self.components, X.components)), sp.Integer(0))

    def simplify(self) -> "Covector":
        return Covector(self.chart, tuple(simplify(c) for c in self.components))


def bracket(X: Derivation, Y: Derivation) -> Derivation:
    """Commutator ``[X, Y]^k = X(Y^k) - Y(X^k)``."""
    _same_chart(X, Y)
    return Derivation(X.chart, tuple(sp.expand(X(yk) - Y(xk)) for xk, yk in zip(X.components, Y.components)))


@dataclass(frozen=True)
class Metric:
    """Symmetric bilinear form ``g_ij`` on the coordinate frame."""

    chart: Chart
    matrix: sp.ImmutableMatrix
    name: str = ""

    def __post_init__(self):
        m = sp.ImmutableMatrix(self.matrix)
        n = self.chart.dim
        if m.shape != (n, n):
            raise ValueError(f"metric must be {n}x{n}, got {m.shape}")
        for i in range(n):
            for j in range(i + 1, n):
                if simplify(m[i, j] - m[j, i]) != 0:
                    raise ValueError(f"metric is not symmetric in ({i}, {j})")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_strings(cls, chart: Chart, rows, name: str = "") -> "Metric":
        """``rows`` is either an n x n nested list or a flat diagonal list."""
        rows = list(rows)
        if rows and not isinstance(rows[0], (list, tuple)):
            diag = [parse(str(r), chart) for r in rows]
            return cls(chart, sp.ImmutableMatrix(sp.diag(*diag)), name)
        return cls(chart, sp.ImmutableMatrix([[parse(str(c), chart) for c in row] for row in rows]), name)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def __getitem__(self, ij) -> sp.Expr:
        return self.matrix[ij]

    def __call__(self, X: Derivation, Y: Derivation) -> sp.Expr:
        _same_chart(self, X)
        _same_chart(self, Y)
        n = self.dim
        return sum((self.matrix[i, j] * X.components[i] * Y.components[j]
                    for i in range(n) for j in range(n) if self.matrix[i, j] != 0), sp.Integer(0))

    @cached_property
    def det(self) -> sp.Expr:
        return simplify(self.matrix.det(method="berkowitz"))

    @cached_property
    def inverse(self) -> sp.ImmutableMatrix:
        """``g^ij`` via adjugate over determinant."""
        if self.det == 0:
            raise DegenerateMetricError(f"metric {self.name or ''} has identically zero determinant")
        if self.matrix.is_diagonal():
            return sp.ImmutableMatrix(sp.diag(*[simplify(1 / self.matrix[i, i]) for i in range(self.dim)]))
        adj = self.matrix.adjugate(method="berkowitz")
        return sp.ImmutableMatrix(self.dim, self.dim, lambda i, j: simplify(adj[i, j] / self.det))

    def numeric(self, point: Mapping[str, float], params: Mapping[str, float] | None = None) -> np.ndarray:
        if params is None:
            params = self.chart.param_midpoint()
        n = self.dim
        return np.array([[evaluate(self.matrix[i, j], point, params) for j in range(n)] for i in range(n)])

    def nondegenerate(self, samples: int = 50, seed: int = DEFAULT_SEED) -> bool:
        if self.det == 0:
            return False
        pts, prm = self.chart.sample(samples, seed)
        for row, prow in zip(pts, prm):
            m = self.numeric(dict(zip(self.chart.coords, row)), dict(zip(self.chart.param_names, prow)))
            if abs(np.linalg.det(m)) < 1e-12:
                return False
        return True

    def is_lorentz(self, samples: int = 50, seed: int = DEFAULT_SEED) -> bool:
        """True iff the signature is ``(+, -, ..., -)`` at every sample point."""
        want = (1,) + (-1,) * (self.dim - 1)
        pts, prm = self.chart.sample(samples, seed)
        return all(
            signature_at(self, dict(zip(self.chart.coords, row)), dict(zip(self.chart.param_names, prow))) == want
            for row, prow in zip(pts, prm)
        )


def flat(g: Metric, X: Derivation) -> Covector:
    """``Psi_g(X) = iota_X g`` with components ``sum_i g_ij X^i``."""
    _same_chart(g, X)
    if g.det == 0:
        raise DegenerateMetricError("flat needs a nondegenerate metric")
    n = g.dim
    return Covector(g.chart, tuple(sp.expand(sum(g[i, j] * X.components[i] for i in range(n))) for j in range(n)))


def sharp(g: Metric, w: Covector) -> Derivation:
    """Inverse of :func:`flat`: ``X^i = sum_j g^ij w_j``."""
    _same_chart(g, w)
    gi = g.inverse
    n = g.dim
    return Derivation(g.chart, tuple(sum(gi[i, j] * w.components[j] for j in range(n)) for i in range(n)))


def signature_at(g: Metric, point: Mapping[str, float], params: Mapping[str, float] | None = None) -> tuple[int, ...]:
    """Eigenvalue signs of ``g_ij`` at a point, sorted descending."""
    m = g.numeric(point, params)
    if abs(np.linalg.det(m)) < 1e-12:
        raise DegenerateMetricError(f"metric is numerically singular at {dict(point)}")
    eig = np.linalg.eigvalsh(m)
    return tuple(sorted((1 if e > 0 else -1 for e in eig), reverse=True))


def pullback(g_dst: Metric, phi: Sequence, chart: Chart) -> Metric:
    """``(phi^* g')_ij = sum_ab d_i phi^a d_j phi^b g'_ab(phi)``."""
    phi = [parse(p, chart) if isinstance(p, str) else sp.sympify(p) for p in phi]
    if len(phi) != g_dst.dim:
        raise ValueError("phi needs one component per target coordinate")
    subs = dict(zip(g_dst.chart.symbols, phi))
    G = g_dst.matrix.subs(subs, simultaneous=True)
    J = sp.Matrix([[sp.diff(pa, s) for s in chart.symbols] for pa in phi])
    return Metric(chart, sp.ImmutableMatrix((J.T * G * J).applyfunc(simplify)))


def is_lorentz_morphism(g_src: Metric, g_dst: Metric, phi: Sequence, **kw) -> ZeroVerdict:
    """Check ``g'(F X, F Y) = g(X, Y)`` for ``F = d phi`` and ring map ``f |-> f o phi``."""
    pulled = pullback(g_dst, phi, g_src.chart)
    diffs = [pulled[i, j] - g_src[i, j] for i in range(g_src.dim) for j in range(i, g_src.dim)]
    return zero_verdict(diffs, g_src.chart, **kw)
