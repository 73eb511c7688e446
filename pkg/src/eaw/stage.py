"""Transport to Weil stages and to spaces of parametrised points.

A Weil stage point at order ``k`` is a ``JetPoint``: a base point plus the
first ``k`` Taylor coefficients of a curve through it.  Parametrised points
are maps from a finite sample set ``P`` into the chart, stored as arrays of
bindings.  Every isomorphism statement here is relative to the finite grids
that represent the spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .algebra import WeilElement, weil_evaluate
from .curvature import random_fields
from .expr import DEFAULT_SEED, Chart, DomainError, compile_numeric, evaluate, parse, simplify, symbol
from .lorentz import Derivation, Metric
from .spectrum import (
    CoordinateAlgebra,
    JetPoint,
    RealStage,
    WeilAlgebra,
    ghost_ideal,
    morphism_defects,
    stage_points,
)

WeilStagePoint = JetPoint


def weil_stage_point(chart: Chart, base: Mapping[str, object] | Sequence, direction: Sequence, order: int = 1,
                     params: Mapping[str, object] | None = None, higher: Sequence[Sequence] = ()) -> JetPoint:
    """Jet point on the curve ``chi + v t + higher[0] t^2 + ...`` truncated at ``t^order``."""
    if order < 1:
        raise ValueError("Weil stage points need order >= 1")
    if isinstance(base, Mapping):
        base = tuple(base[c] for c in chart.coords)
    zero = tuple(0 for _ in range(chart.dim))
    jets = [tuple(direction)] + [tuple(h) for h in higher]
    jets = (jets + [zero] * order)[:order]
    mid = chart.param_midpoint()
    prm = tuple((params or {}).get(p, mid[p]) for p in chart.param_names)
    return JetPoint(chart, tuple(base), tuple(jets), prm)


def _taylor_lift(f: sp.Expr, point: JetPoint) -> WeilElement:
    """Independent route: expand ``f`` along the curve with a series in ``t``."""
    t = sp.Symbol("_t", real=True)
    k = point.order
    subs = {}
    for i, s in enumerate(point.chart.symbols):
        subs[s] = sp.sympify(point.base[i]) + sum(sp.sympify(point.jets[m][i]) * t ** (m + 1) for m in range(k))
    for name, val in zip(point.chart.param_names, point.params):
        subs[symbol(name)] = sp.sympify(val)
    curve = sp.sympify(f).subs(subs, simultaneous=True)
    series = sp.series(curve, t, 0, k + 1).removeO()
    return WeilElement(tuple(sp.expand(series.coeff(t, m)) if m else sp.expand(series.subs(t, 0))
                             for m in range(k + 1)))


def lift_to_weil(f, k: int, method: str = "algebraic") -> Callable[[JetPoint], WeilElement]:
    """``rho -> rho(f)`` for order-``k`` stage points.

    ``algebraic`` pushes the expression tree through Weil arithmetic;
    ``taylor`` expands along the curve with a series.  They agree, which
    is the smoothness law for the primitive library.
    """
    if k < 1:
        raise ValueError("lift order must be >= 1")
    if method not in ("algebraic", "taylor"):
        raise ValueError(f"unknown lift method {method!r}")
    f = sp.sympify(f)

    def lifted(point: JetPoint) -> WeilElement:
        if point.order != k:
            raise ValueError(f"stage point has order {point.order}, lift has order {k}")
        if method == "taylor":
            return _taylor_lift(f, point)
        return weil_evaluate(f, point.coordinate_images(), k)

    return lifted


def central_difference_slope(f, point: JetPoint, h: float = 1e-6) -> float:
    """``(f(chi + h v) - f(chi - h v)) / 2h`` with ``v`` the first jet."""
    chart = point.chart
    prm = dict(zip(chart.param_names, (float(p) for p in point.params)))

    def at(s):
        b = {c: float(point.base[i]) + s * float(point.jets[0][i]) for i, c in enumerate(chart.coords)}
        return evaluate(f, b, prm)

    return (at(h) - at(-h)) / (2 * h)


# --------------------------------------------------------------------------
# Random exact draws

def rational_point(chart: Chart, rng: np.random.Generator, denominator: int = 64, margin: float = 0.05):
    """Exact rational coordinates and parameters strictly inside the chart box."""
    prm = {}
    for name, lo, hi in chart.params:
        v = rng.uniform(lo, hi) if hi > lo else lo
        prm[name] = sp.Rational(Fraction(v).limit_denominator(denominator))
    bounds = chart.bounds({k: float(v) for k, v in prm.items()})
    base = []
    for lo, hi in bounds:
        w = hi - lo
        v = rng.uniform(lo + margin * w, hi - margin * w)
        base.append(sp.Rational(Fraction(v).limit_denominator(denominator)))
    return tuple(base), prm


def random_jet_point(chart: Chart, k: int, rng: np.random.Generator) -> JetPoint:
    base, prm = rational_point(chart, rng)
    jets = [tuple(sp.Integer(int(v)) for v in rng.integers(-3, 4, chart.dim)) for _ in range(k)]
    return JetPoint(chart, base, tuple(jets), tuple(prm[p] for p in chart.param_names))


# --------------------------------------------------------------------------
# Transported metric

@dataclass(frozen=True)
class TransportedMetric:
    """``gbar(Xbar, Ybar) = sum lift(g_ij) lift(X^i) lift(Y^j)`` at a Weil stage."""

    metric: Metric
    order: int

    def __call__(self, X: Derivation, Y: Derivation, point: JetPoint) -> WeilElement:
        n = self.metric.dim
        lx = [point(c) for c in X.components]
        ly = [point(c) for c in Y.components]
        out = WeilElement.scalar(0, self.order)
        for i in range(n):
            for j in range(n):
                if self.metric[i, j] != 0:
                    out = out + point(self.metric[i, j]) * lx[i] * ly[j]
        return out

    def lifted_scalar(self, X: Derivation, Y: Derivation, point: JetPoint) -> WeilElement:
        return point(self.metric(X, Y))


def transport_metric(g: Metric, k: int) -> TransportedMetric:
    if k < 1:
        raise ValueError("transport needs a Weil order >= 1")
    return TransportedMetric(g, k)


@dataclass
class CheckReport:
    name: str
    passed: bool
    draws: int = 0
    max_residual: float = 0.0
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "draws": self.draws,
            "max_residual": self.max_residual,
            "failures": [str(f) for f in self.failures[:5]],
            **self.details,
        }


def _weil_residual(a: WeilElement, b: WeilElement) -> tuple[bool, float]:
    diff = [simplify(sp.sympify(x - y)) for x, y in zip(a.coeffs, b.coeffs)]
    exact = all(d == 0 for d in diff)
    mag = max((abs(float(d)) for d in diff), default=0.0)
    return exact, mag


def staged_metric_identity(g: Metric, k: int = 1, draws: int = 100, seed: int = DEFAULT_SEED) -> CheckReport:
    """``gbar(Xbar, Ybar) == lift(g(X, Y))`` exactly on random rational draws."""
    gbar = transport_metric(g, k)
    rng = np.random.default_rng(seed)
    failures, worst = [], 0.0
    fields = random_fields(g.chart, 2 * draws, seed)
    for d in range(draws):
        X, Y = fields[2 * d], fields[2 * d + 1]
        pt = random_jet_point(g.chart, k, rng)
        exact, mag = _weil_residual(gbar(X, Y, pt), gbar.lifted_scalar(X, Y, pt))
        worst = max(worst, mag)
        if not exact:
            failures.append((pt.base, X.components, Y.components))
    return CheckReport(f"staged-metric W^{k}", not failures, draws, worst, failures)


# --------------------------------------------------------------------------
# Theta isomorphism at Weil stages

@dataclass
class ThetaIsoReport:
    algebra: str
    stage: str
    precondition: bool
    isomorphic_onto_image: bool | None
    real_kernel: list
    stage_kernel: list
    morphism_ok: bool | None = None
    notes: list = field(default_factory=list)

    @property
    def kernels_equal(self) -> bool:
        return [str(a) for a in self.real_kernel] == [str(b) for b in self.stage_kernel]

    def to_dict(self) -> dict:
        return {
            "algebra": self.algebra,
            "stage": self.stage,
            "precondition_real_geometric": self.precondition,
            "isomorphic_onto_image": self.isomorphic_onto_image,
            "real_kernel": [str(x) for x in self.real_kernel],
            "stage_kernel": [str(x) for x in self.stage_kernel],
            "kernels_equal": self.kernels_equal,
            "morphism_laws": self.morphism_ok,
            "notes": list(self.notes),
        }


def _random_polynomials(chart: Chart, count: int, seed: int) -> list[sp.Expr]:
    rng = np.random.default_rng(seed)
    xs = chart.symbols
    out = []
    for _ in range(count):
        c = rng.integers(-3, 4, size=2 * len(xs) + 1)
        e = sp.Integer(int(c[0])) + sum(int(a) * x + int(b) * x ** 2 for a, b, x in zip(c[1::2], c[2::2], xs))
        if e != 0:
            out.append(e)
    return out


def theta_iso_check(C, k: int = 1, *, random_elements: int = 4, seed: int = DEFAULT_SEED,
                    law_points: int = 4, tol: float = 1e-10) -> ThetaIsoReport:
    """Injectivity of theta at ``W^k`` on generators plus random elements, given real geometricity."""
    stage = WeilAlgebra(k)
    real = ghost_ideal(C, RealStage())
    if not real.geometric:
        return ThetaIsoReport(C.describe(), stage.describe(), False, None, real.kernel_basis, [],
                              notes=[f"not geometric at R (ghost {real.witness}); the Weil-stage isomorphism check does not apply"])
    if not isinstance(C, CoordinateAlgebra):
        W = ghost_ideal(C, stage)
        return ThetaIsoReport(C.describe(), stage.describe(), True, W.geometric, real.kernel_basis,
                              W.kernel_basis, None, ["exact kernel over the full point family"])
    extra = _random_polynomials(C.chart, random_elements, seed)
    probe = CoordinateAlgebra(C.chart, C.density, tuple(C.probes) + tuple(extra))
    real = ghost_ideal(probe, RealStage())
    W = ghost_ideal(probe, stage)
    pts = stage_points(probe, stage, max_points=law_points)
    fam = probe.probe_family()
    ok = True
    for i, pt in enumerate(pts):
        f, g = fam[i % len(fam)], fam[(3 * i + 1) % len(fam)]
        for w in morphism_defects(pt, f, g).values():
            if max(abs(float(c)) for c in w.coeffs) > tol:
                ok = False
    notes = list(W.notes) + [f"{len(extra)} random elements added to the probe family"]
    return ThetaIsoReport(C.describe(), stage.describe(), True, W.geometric and real.geometric,
                          real.kernel_basis, W.kernel_basis, ok, notes)


# --------------------------------------------------------------------------
# Parametrised points

def circle_samples(m: int) -> np.ndarray:
    return 2 * np.pi * np.arange(m) / m


@dataclass(frozen=True)
class HatFunction:
    """``fhat(phi) = f o phi`` evaluated on the sample set of ``P``."""

    f: sp.Expr
    chart: Chart

    def __call__(self, phi: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        return compile_numeric(self.f, self.chart)(phi, params)


@dataclass
class ParametrizedSpace:
    chart: Chart
    samples: np.ndarray                # values of the parameter p
    loops: dict                        # name -> array [len(samples), dim]
    density: int = 8

    @property
    def constant_points(self) -> np.ndarray:
        """Grid of ``M``; each row ``m`` stands for the constant map ``phi_m``."""
        return self.chart.grid(self.density)

    def constant_map(self, m: Sequence[float]) -> np.ndarray:
        return np.tile(np.asarray(m, dtype=float), (len(self.samples), 1))

    def hat(self, f) -> HatFunction:
        return HatFunction(sp.sympify(f), self.chart)

    def constant_values(self, f) -> np.ndarray:
        """``fhat(phi_m)(p)`` for every grid point ``m`` and sample ``p``: shape ``(grid, samples)``."""
        grid = self.constant_points
        stacked = np.repeat(grid, len(self.samples), axis=0)
        return self.hat(f)(stacked).reshape(grid.shape[0], len(self.samples))


def parametrized_space(chart: Chart, samples, loops: Mapping[str, Sequence] | None = None,
                       density: int = 8) -> ParametrizedSpace:
    """Build ``M^P`` data; ``samples`` is a count (circle) or explicit values, loops are expressions in ``p``."""
    P = circle_samples(int(samples)) if np.isscalar(samples) else np.asarray(samples, dtype=float)
    scope = Chart(("p",))
    run_p = P.reshape(-1, 1)
    bounds = chart.bounds()
    out = {}
    for name, comps in (loops or {}).items():
        if len(comps) != chart.dim:
            raise ValueError(f"loop {name!r} needs {chart.dim} components")
        cols = []
        for c in comps:
            e = parse(c, scope) if isinstance(c, str) else sp.sympify(c)
            cols.append(compile_numeric(e, scope)(run_p))
        arr = np.stack(cols, axis=1)
        for i, (lo, hi) in enumerate(bounds):
            bad = np.nonzero((arr[:, i] < lo) | (arr[:, i] > hi))[0]
            if bad.size:
                j = int(bad[0])
                raise DomainError(f"loop {name!r} leaves the chart at p={P[j]:.6g}: "
                                  f"{chart.coords[i]}={arr[j, i]:.6g} not in [{lo:.6g}, {hi:.6g}]")
        out[name] = arr
    return ParametrizedSpace(chart, P, out, density)


@dataclass
class HatIsoReport:
    grid: str
    samples: int
    injective: bool
    homomorphism: bool
    diagram_commutes: bool
    dimension: int
    collisions: list = field(default_factory=list)
    max_hom_residual: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.injective and self.homomorphism and self.diagram_commutes

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "samples": self.samples,
            "injective": self.injective,
            "homomorphism": self.homomorphism,
            "diagram_commutes": self.diagram_commutes,
            "dimension": self.dimension,
            "collisions": self.collisions,
            "max_hom_residual": self.max_hom_residual,
            "notes": list(self.notes),
        }


def restriction_recovers(space: ParametrizedSpace, f) -> bool:
    """``fhat`` restricted to constant maps, read back through ``M = M_0^P``, equals ``f`` bitwise."""
    vals = space.constant_values(f)
    direct = compile_numeric(sp.sympify(f), space.chart)(space.constant_points)
    return bool(np.all(vals == direct[:, None]))


def hat_morphism_residual(space: ParametrizedSpace, f, g) -> float:
    """Worst ``|(fg)hat - fhat ghat|`` and ``|(f+g)hat - fhat - ghat|`` over every loop."""
    worst = 0.0
    F, G = space.hat(f), space.hat(g)
    FG, FpG = space.hat(sp.sympify(f) * g), space.hat(sp.sympify(f) + g)
    for arr in space.loops.values():
        a, b = F(arr), G(arr)
        worst = max(worst, float(np.max(np.abs(FG(arr) - a * b))), float(np.max(np.abs(FpG(arr) - a - b))))
    return worst


def hat_iso_check(space: ParametrizedSpace, generators: Sequence, *, tol: float = 1e-12) -> HatIsoReport:
    gens = [parse(g, space.chart) if isinstance(g, str) else sp.sympify(g) for g in generators]
    grid = space.constant_points
    cols = [compile_numeric(g, space.chart)(grid) for g in gens]
    collisions = []
    # distinct generators that agree on every constant map
    for i in range(len(gens)):
        for j in range(i + 1, len(gens)):
            if simplify(gens[i] - gens[j]) != 0 and np.max(np.abs(cols[i] - cols[j])) <= tol:
                collisions.append({"pair": [str(gens[i]), str(gens[j])],
                                   "hint": f"agree on the {space.density}^{space.chart.dim} grid; refine the grid"})
    # generator span restricted to M_0^P
    span = np.stack([np.ones(grid.shape[0])] + cols, axis=1)
    full_rank = np.linalg.matrix_rank(span, tol=tol * max(1.0, np.max(np.abs(span)))) == span.shape[1]
    # grid points separated by the generators
    key = np.round(np.stack(cols, axis=1), 9)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    separates = bool(np.all(counts == 1))
    if not separates:
        dup = int(first[np.argmax(counts > 1)])
        collisions.append({"points": "grid points with equal generator values",
                           "example": [float(v) for v in grid[dup]]})
    worst = 0.0
    for i in range(len(gens)):
        for j in range(i, len(gens)):
            worst = max(worst, hat_morphism_residual(space, gens[i], gens[j]))
    diagram = all(restriction_recovers(space, g) for g in gens)
    notes = [f"M represented by a {space.density}^{space.chart.dim} grid, P by {len(space.samples)} samples"]
    if not full_rank:
        notes.append("generator span is linearly dependent on the constant maps")
    return HatIsoReport(f"{space.density}^{space.chart.dim}", len(space.samples),
                        bool(full_rank and separates and not collisions), bool(worst <= tol), diagram, space.chart.dim,
                        collisions, worst, notes)


def weil_ladder(max_order: int = 3) -> list:
    """Default finite stage list ``R, W^1, ..., W^max_order``."""
    return [RealStage()] + [WeilAlgebra(k) for k in range(1, max_order + 1)]


def lifts_agree(f, point: JetPoint) -> bool:
    """Algebraic and Taylor lifts agree coefficientwise (exactly, after simplification)."""
    a = lift_to_weil(f, point.order)(point)
    b = lift_to_weil(f, point.order, "taylor")(point)
    return _weil_residual(a, b)[0]


__all__ = [
    "WeilStagePoint", "weil_stage_point", "lift_to_weil", "central_difference_slope", "rational_point",
    "random_jet_point", "TransportedMetric", "transport_metric", "CheckReport", "staged_metric_identity",
    "ThetaIsoReport", "theta_iso_check", "circle_samples", "HatFunction", "ParametrizedSpace",
    "parametrized_space", "HatIsoReport", "restriction_recovers", "hat_morphism_residual", "hat_iso_check",
    "weil_ladder", "lifts_agree", "random_function", "jet_morphism_check",
]


# --------------------------------------------------------------------------
# Jet morphism property

_ATOMS = ("{x}", "{x}*{y}", "{x}^2", "sin({x})", "exp({x}/4)", "1/(1+{x}^2)", "cos({x}-{y})")


def random_function(chart: Chart, rng: np.random.Generator, terms: int = 3) -> sp.Expr:
    """Small random element built from coordinates, products and library primitives."""
    names = chart.coords
    parts = []
    for _ in range(terms):
        atom = _ATOMS[int(rng.integers(len(_ATOMS)))]
        x, y = names[int(rng.integers(len(names)))], names[int(rng.integers(len(names)))]
        coeff = int(rng.integers(-3, 4)) or 1
        parts.append(f"{coeff}*({atom.format(x=x, y=y)})")
    return parse(" + ".join(parts), chart)


def jet_morphism_check(chart: Chart, k: int = 1, draws: int = 1000, seed: int = DEFAULT_SEED,
                       slope_tol: float = 1e-6) -> CheckReport:
    """``lift(fg) == lift(f) lift(g)`` exactly, and the first jet matches a central difference."""
    rng = np.random.default_rng(seed)
    failures, worst_slope = [], 0.0
    for _ in range(draws):
        f, g = random_function(chart, rng), random_function(chart, rng)
        pt = random_jet_point(chart, k, rng)
        lf, lg, lfg = pt(f), pt(g), pt(f * g)
        prod = lf * lg
        if not all(sp.expand(a - b) == 0 or simplify(a - b) == 0 for a, b in zip(lfg.coeffs, prod.coeffs)):
            failures.append(("multiplicative", str(f), str(g), pt.base))
        slope = float(lf.coeffs[1])
        fd = central_difference_slope(f, pt)
        rel = abs(slope - fd) / max(abs(slope), 1.0)
        worst_slope = max(worst_slope, rel)
        if rel > slope_tol:
            failures.append(("slope", str(f), pt.base, slope, fd))
    return CheckReport(f"jet-morphism W^{k}", not failures, draws, worst_slope, failures,
                       {"slope_tol": slope_tol})
