"""Points of algebras as morphisms, the theta map and ghost ideals.

Supported presentations are coordinate algebras on a chart (decided on a
sample grid), truncated Weil algebras, polynomial quotients in at most three
generators, and Grassmann-valued function algebras.  Finite-dimensional
kernels are computed exactly by linear algebra over the rationals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np
import sympy as sp

from .algebra import (
    GrassmannElement,
    GrassmannFunction,
    WeilElement,
    format_grassmann,
    grassmann_function,
    weil_evaluate,
)
from .expr import (
    DEFAULT_SEED,
    PRIMITIVES,
    Chart,
    ExprError,
    compile_numeric,
    evaluate,
    parse,
    simplify,
    symbol,
)

DEFAULT_GRID = 32
VANISH_TOL = 1e-12


class UnsupportedPresentation(ExprError):
    pass


# --------------------------------------------------------------------------
# Presentations

@dataclass(frozen=True)
class CoordinateAlgebra:
    """Smooth functions on a chart, decided pointwise on a ``density**dim`` grid."""

    chart: Chart
    density: int = DEFAULT_GRID
    probes: tuple = ()

    kind = "coordinate"

    def describe(self) -> str:
        return f"C({','.join(self.chart.coords)})"

    def element(self, text: str) -> sp.Expr:
        return parse(text, self.chart)

    @cached_property
    def grid(self) -> np.ndarray:
        return self.chart.grid(self.density)

    def probe_family(self, seed: int = DEFAULT_SEED) -> list[sp.Expr]:
        """Coordinates, pairwise products, a unit and seeded random polynomials."""
        xs = self.chart.symbols
        fam: list[sp.Expr] = [sp.Integer(1), *xs]
        fam += [a * b for a, b in itertools.combinations_with_replacement(xs, 2)]
        rng = np.random.default_rng(seed)
        for _ in range(3):
            coeffs = rng.integers(-3, 4, size=len(xs) + 1)
            fam.append(sp.Integer(int(coeffs[0])) + sum(int(c) * x for c, x in zip(coeffs[1:], xs)) + xs[0] ** 2)
        fam += [sp.sympify(p) for p in self.probes]
        return fam


@dataclass(frozen=True)
class QuotientAlgebra:
    """``R[x1..xm] / (relations)`` for a zero-dimensional ideal, ``m <= 3``."""

    generators: tuple
    relations: tuple

    kind = "quotient"

    def __post_init__(self):
        gens = tuple(str(g) for g in self.generators)
        if not 1 <= len(gens) <= 3:
            raise UnsupportedPresentation("quotient presentations need 1 to 3 generators")
        scope = Chart(gens)
        rels = []
        for r in self.relations:
            e = parse(r, scope) if isinstance(r, str) else sp.sympify(r)
            poly = sp.Poly(e, *[symbol(g) for g in gens])
            if not all(c.is_Rational for c in poly.coeffs()):
                raise UnsupportedPresentation(f"relation {e} must have rational coefficients")
            rels.append(poly.as_expr())
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "relations", tuple(rels))

    def describe(self) -> str:
        rels = ", ".join(str(r).replace("**", "^") for r in self.relations)
        return f"R[{','.join(self.generators)}]/({rels})"

    @property
    def symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(symbol(g) for g in self.generators)

    @cached_property
    def groebner(self):
        if not self.relations:
            raise UnsupportedPresentation("a quotient with no relations is infinite-dimensional")
        G = sp.groebner(list(self.relations), *self.symbols, order="grevlex")
        if not G.is_zero_dimensional and list(G.exprs) != [1]:
            raise UnsupportedPresentation(f"{self.describe()} is not finite-dimensional")
        return G

    @cached_property
    def basis(self) -> tuple[sp.Expr, ...]:
        """Standard monomials of the Groebner basis, lowest degree first."""
        G = self.groebner
        if list(G.exprs) == [1]:
            return ()
        leads = [sp.Poly(g, *self.symbols).monoms(order="grevlex")[0] for g in G.exprs]
        bound = []
        for i in range(len(self.symbols)):
            pure = [m[i] for m in leads if all(m[j] == 0 for j in range(len(m)) if j != i)]
            bound.append(min(pure))
        out = []
        for exps in itertools.product(*(range(b) for b in bound)):
            if any(all(e >= l for e, l in zip(exps, lead)) for lead in leads):
                continue
            out.append(sp.Mul(*(s ** e for s, e in zip(self.symbols, exps))))
        return tuple(sorted(out, key=lambda m: (sp.Poly(m, *self.symbols).total_degree(), sp.default_sort_key(m))))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def element(self, text: str) -> sp.Expr:
        return self.reduce(parse(text, Chart(self.generators)))

    def reduce(self, f) -> sp.Expr:
        f = sp.expand(sp.sympify(f))
        if list(self.groebner.exprs) == [1]:
            return sp.Integer(0)
        if f.free_symbols - set(self.symbols):
            # symbolic coefficients: reduce over a coefficient ring that contains them
            return sp.expand(sp.reduced(f, list(self.groebner.exprs), *self.symbols, order="grevlex")[1])
        return self.groebner.reduce(f)[1]

    def coordinates(self, f) -> list[sp.Expr]:
        nf = sp.Poly(self.reduce(f), *self.symbols)
        return [nf.coeff_monomial(m) for m in self.basis]

    def from_coordinates(self, vec: Sequence) -> sp.Expr:
        return sp.expand(sum(c * b for c, b in zip(vec, self.basis)))


@dataclass(frozen=True)
class WeilAlgebra:
    """``R[e]/(e^(k+1))``; also usable as a stage."""

    order: int

    kind = "weil"

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("Weil order must be nonnegative")

    def describe(self) -> str:
        return "R" if self.order == 0 else f"W^{self.order}"

    @cached_property
    def as_quotient(self) -> QuotientAlgebra:
        return QuotientAlgebra(("e",), (symbol("e") ** (self.order + 1),))

    @property
    def basis(self) -> tuple[WeilElement, ...]:
        return tuple(WeilElement(tuple(1 if i == j else 0 for i in range(self.order + 1)))
                     for j in range(self.order + 1))

    @property
    def dimension(self) -> int:
        return self.order + 1

    def element(self, text: str) -> WeilElement:
        from .algebra import parse_weil
        return parse_weil(text, self.order)

    def coordinates(self, w: WeilElement) -> list:
        return list(w.coeffs)

    def from_coordinates(self, vec: Sequence) -> WeilElement:
        return WeilElement(tuple(vec))

    def to_polynomial(self, w: WeilElement) -> sp.Expr:
        e = symbol("e")
        return sum((sp.sympify(c) * e ** j for j, c in enumerate(w.coeffs)), sp.Integer(0))


@dataclass(frozen=True)
class GrassmannFunctionAlgebra:
    """Grassmann-valued smooth functions ``C(M, Lambda(xi_1..xi_q))`` on a chart."""

    chart: Chart
    q: int
    density: int = DEFAULT_GRID

    kind = "grassmann-functions"

    def describe(self) -> str:
        return f"C({','.join(self.chart.coords)}; Λ{self.q})"

    @cached_property
    def grid(self) -> np.ndarray:
        return self.chart.grid(self.density)

    def probe_family(self) -> list[GrassmannFunction]:
        xs = self.chart.symbols
        fam = [grassmann_function({(): 1}, self.chart, self.q)]
        fam += [grassmann_function({(): x}, self.chart, self.q) for x in xs]
        for i in range(1, self.q + 1):
            fam.append(grassmann_function({(i,): 1}, self.chart, self.q))
            fam.append(grassmann_function({(i,): xs[0]}, self.chart, self.q))
        if self.q >= 2:
            fam.append(grassmann_function({(1, 2): 1}, self.chart, self.q))
        return fam


AlgebraPresentation = Union[CoordinateAlgebra, QuotientAlgebra, WeilAlgebra, GrassmannFunctionAlgebra]


# --------------------------------------------------------------------------
# Stages

@dataclass(frozen=True)
class RealStage:
    def describe(self) -> str:
        return "R"

    @property
    def dimension(self) -> int:
        return 1


@dataclass(frozen=True)
class GrassmannStage:
    """Grassmann algebra on ``q`` generators as a stage; ``even_only`` restricts to Λ0."""

    q: int
    even_only: bool = False

    def describe(self) -> str:
        return f"Λ{self.q}" + ("_0" if self.even_only else "")

    def nilpotents(self) -> list[GrassmannElement]:
        if self.even_only:
            return [GrassmannElement.monomial((1 << i) | (1 << j), self.q)
                    for i, j in itertools.combinations(range(self.q), 2)]
        return [GrassmannElement.generator(i, self.q) for i in range(1, self.q + 1)]


Stage = Union[RealStage, WeilAlgebra, GrassmannStage]


def as_stage(stage) -> Stage:
    if stage is None or stage == "R":
        return RealStage()
    if isinstance(stage, WeilAlgebra) and stage.order == 0:
        return RealStage()
    return stage


# --------------------------------------------------------------------------
# Points

@dataclass(frozen=True)
class CoordinatePoint:
    """Evaluation at a point of the chart."""

    chart: Chart
    values: tuple
    params: tuple = ()

    def bindings(self) -> dict:
        return dict(zip(self.chart.coords, self.values))

    def param_bindings(self) -> dict:
        return dict(zip(self.chart.param_names, self.params))

    def __call__(self, f):
        if isinstance(f, GrassmannFunction):
            f = f.body
        return evaluate(f, self.bindings(), self.param_bindings())

    @property
    def label(self) -> str:
        return "(" + ", ".join(f"{c}={v:g}" for c, v in zip(self.chart.coords, self.values)) + ")"


@dataclass(frozen=True)
class ProjectionPoint:
    """The unique real point of a Weil algebra: ``x + y e |-> x``."""

    order: int

    def __call__(self, w: WeilElement):
        return w.real_part

    @property
    def label(self) -> str:
        return "π"


@dataclass(frozen=True)
class QuotientPoint:
    """Morphism out of a quotient fixed by the images of the generators.

    Images are exact reals (a real point) or Weil elements (a stage point);
    Weil images may carry free real parameters naming a whole family.
    """

    algebra: QuotientAlgebra
    images: tuple
    free: tuple = ()

    def __call__(self, f):
        f = self.algebra.reduce(f)
        if self.images and isinstance(self.images[0], WeilElement):
            env = dict(zip(self.algebra.symbols, self.images))
            out = weil_evaluate(f, env, self.images[0].order)
            return WeilElement(tuple(sp.expand(c) for c in out.coeffs))
        return sp.expand(f.subs(dict(zip(self.algebra.symbols, self.images))))

    @property
    def label(self) -> str:
        return ", ".join(f"{g}↦{_fmt(v)}" for g, v in zip(self.algebra.generators, self.images))


def _fmt(v) -> str:
    return str(v).replace("**", "^")


@dataclass(frozen=True)
class WeilPointOfWeil:
    """Morphism ``W^m -> W^k`` sending ``e`` to a nilpotent Weil element."""

    source_order: int
    image: WeilElement
    free: tuple = ()

    def __call__(self, w: WeilElement):
        out = WeilElement.scalar(0, self.image.order)
        power = WeilElement.scalar(1, self.image.order)
        for c in w.coeffs:
            out = out + power * c
            power = power * self.image
        return WeilElement(tuple(sp.expand(sp.sympify(c)) for c in out.coeffs))

    @property
    def label(self) -> str:
        return f"e↦{self.image}"


@dataclass(frozen=True)
class JetPoint:
    """Weil-stage point ``rho(f) = f(chi) + (v.grad f)(chi) e + ...``.

    ``jets[m-1]`` is the order-``m`` coefficient of the curve
    ``chi + jets[0] t + jets[1] t^2 + ...``; ``rho`` evaluates ``f`` on that
    curve modulo ``t^(k+1)``.
    """

    chart: Chart
    base: tuple
    jets: tuple
    params: tuple = ()

    @property
    def order(self) -> int:
        return len(self.jets)

    def coordinate_images(self) -> dict:
        k = self.order
        env = {}
        for i, s in enumerate(self.chart.symbols):
            coeffs = [self.base[i]] + [self.jets[m][i] for m in range(k)]
            env[s] = WeilElement(tuple(coeffs))
        for name, val in zip(self.chart.param_names, self.params):
            env[symbol(name)] = WeilElement.scalar(val, k)
        return env

    def __call__(self, f) -> WeilElement:
        if isinstance(f, GrassmannFunction):
            f = f.body
        return weil_evaluate(f, self.coordinate_images(), self.order)

    @property
    def real_point(self) -> CoordinatePoint:
        return CoordinatePoint(self.chart, tuple(float(v) for v in self.base), tuple(self.params))


@dataclass(frozen=True)
class GrassmannPoint:
    """``chi_{v,a}(f) = f(x, 0) + v(f(., 0)) a`` for nilpotent ``a``."""

    chart: Chart
    base: tuple
    direction: tuple
    a: GrassmannElement
    params: tuple = ()

    def __post_init__(self):
        if not self.a.is_nilpotent():
            raise ValueError("chi_{v,a} needs a nilpotent a (no unit component)")
        if len(self.direction) != self.chart.dim or len(self.base) != self.chart.dim:
            raise ValueError("base point and tangent vector must match the chart dimension")

    def __call__(self, f) -> GrassmannElement:
        body = f.body if isinstance(f, GrassmannFunction) else sp.sympify(f)
        subs = {s: sp.sympify(v) for s, v in zip(self.chart.symbols, self.base)}
        subs.update({symbol(p): sp.sympify(v) for p, v in zip(self.chart.param_names, self.params)})
        value = body.subs(subs)
        slope = sum((sp.sympify(vi) * sp.diff(body, s) for vi, s in zip(self.direction, self.chart.symbols)),
                    sp.Integer(0)).subs(subs)
        return GrassmannElement.scalar(sp.expand(value), self.a.q) + self.a * sp.expand(slope)


def grassmann_stage_point(x: Mapping[str, object], v: Sequence, a: GrassmannElement,
                          chart: Chart, params: Mapping[str, object] | None = None) -> GrassmannPoint:
    base = tuple(x[c] for c in chart.coords)
    prm = tuple((params or {}).get(p, chart.param_midpoint()[p]) for p in chart.param_names)
    return GrassmannPoint(chart, base, tuple(v), a, prm)


@dataclass(frozen=True)
class ScaledPoint:
    """``chi . 1_A``: a real point viewed at a larger stage."""

    point: object
    stage: Stage

    def __call__(self, f):
        val = self.point(f)
        if isinstance(self.stage, WeilAlgebra):
            return WeilElement.scalar(val, self.stage.order)
        if isinstance(self.stage, GrassmannStage):
            return GrassmannElement.scalar(val, self.stage.q)
        return val


# --------------------------------------------------------------------------
# Spectra

@dataclass(frozen=True)
class GridSpectrum:
    """Real points of a coordinate algebra: its sample grid."""

    chart: Chart
    points: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self) -> Iterator[CoordinatePoint]:
        prm = tuple(self.chart.param_midpoint()[p] for p in self.chart.param_names)
        for row in self.points:
            yield CoordinatePoint(self.chart, tuple(float(v) for v in row), prm)

    def values(self, f) -> np.ndarray:
        if isinstance(f, GrassmannFunction):
            f = f.body
        return compile_numeric(sp.sympify(f), self.chart)(self.points)


def real_spectrum(C: AlgebraPresentation):
    """All morphisms to the reals: a list of points, or the grid for function algebras."""
    if isinstance(C, (CoordinateAlgebra, GrassmannFunctionAlgebra)):
        return GridSpectrum(C.chart, C.grid)
    if isinstance(C, WeilAlgebra):
        return [ProjectionPoint(C.order)]
    if isinstance(C, QuotientAlgebra):
        return [QuotientPoint(C, tuple(sol)) for sol in _real_solutions(C)]
    raise UnsupportedPresentation(f"no real spectrum for {type(C).__name__}")


def _real_solutions(C: QuotientAlgebra) -> list[tuple]:
    if list(C.groebner.exprs) == [1]:
        return []
    sols = sp.solve(list(C.relations), list(C.symbols), dict=True)
    out = set()
    for sol in sols:
        if set(sol) != set(C.symbols):
            raise UnsupportedPresentation(f"{C.describe()} has a positive-dimensional solution set")
        vals = tuple(sp.nsimplify(sol[s]) if sol[s].is_Float else sp.simplify(sol[s]) for s in C.symbols)
        if all(v.is_real for v in vals):
            out.add(vals)
    return sorted(out, key=lambda t: tuple(float(v) for v in t))


@dataclass(frozen=True)
class ThetaImage:
    """``f-bar``: the function ``point |-> point(f)`` on a spectrum."""

    element: object
    spectrum: object

    def __call__(self, point):
        return point(self.element)

    def table(self) -> dict[str, object]:
        if isinstance(self.spectrum, GridSpectrum):
            raise TypeError("grid spectra are tabulated with .values()")
        return {p.label: p(self.element) for p in self.spectrum}

    def values(self) -> np.ndarray:
        return self.spectrum.values(self.element)


def theta_image(C: AlgebraPresentation, f, stage: Stage | None = None) -> ThetaImage:
    stage = as_stage(stage)
    spectrum = real_spectrum(C) if isinstance(stage, RealStage) else stage_points(C, stage)
    return ThetaImage(f, spectrum)


def theta_image_at_stage(C: AlgebraPresentation, f, stage: Stage) -> ThetaImage:
    return theta_image(C, f, stage)


# --------------------------------------------------------------------------
# Stage points

def stage_points(C: AlgebraPresentation, stage: Stage, *, directions: Sequence[Sequence] | None = None,
                 max_points: int = 64) -> list:
    """The documented point family ``|C|_A`` for the stage ``A``.

    Finite-dimensional algebras get every morphism, parametrised by free
    real symbols where the solution set is a family.  Function algebras get
    jet points (Weil stages) or ``chi_{v,a}`` points (Grassmann stages) over
    a subsample of the grid, plus the scaled real points ``chi . 1_A``.
    """
    stage = as_stage(stage)
    if isinstance(stage, RealStage):
        spec = real_spectrum(C)
        return list(spec) if not isinstance(spec, GridSpectrum) else list(itertools.islice(spec, max_points))
    if isinstance(stage, WeilAlgebra):
        if isinstance(C, QuotientAlgebra):
            return _quotient_weil_points(C, stage.order)
        if isinstance(C, WeilAlgebra):
            return _weil_weil_points(C.order, stage.order)
        if isinstance(C, CoordinateAlgebra):
            return _jet_points(C, stage.order, directions, max_points)
    if isinstance(stage, GrassmannStage) and isinstance(C, (CoordinateAlgebra, GrassmannFunctionAlgebra)):
        return _grassmann_points(C, stage, directions, max_points)
    raise UnsupportedPresentation(f"stage {stage.describe()} is not supported for {C.describe()}")


def _jet_symbols(prefix: str, count: int, order: int) -> list[list[sp.Symbol]]:
    return [[sp.Symbol(f"{prefix}{i + 1}_{m}", real=True) for m in range(1, order + 1)] for i in range(count)]


def _solve_nilpotent_conditions(eqs: list[sp.Expr], unknowns: list[sp.Symbol]) -> list[dict]:
    eqs = [sp.expand(e) for e in eqs if sp.expand(e) != 0]
    if not eqs:
        return [{}]
    sols = sp.solve(eqs, unknowns, dict=True)
    return [s for s in sols if all(v.is_real is not False for v in s.values())]


def _quotient_weil_points(C: QuotientAlgebra, k: int) -> list[QuotientPoint]:
    points = []
    for base in _real_solutions(C):
        vs = _jet_symbols("v", len(C.generators), k)
        images = [WeilElement((b, *row)) for b, row in zip(base, vs)]
        env = dict(zip(C.symbols, images))
        eqs = []
        for rel in C.relations:
            val = weil_evaluate(rel, env, k)
            eqs.extend(val.coeffs[1:])
        unknowns = [s for row in vs for s in row]
        for sol in _solve_nilpotent_conditions(eqs, unknowns):
            imgs = tuple(WeilElement(tuple(sp.sympify(c).subs(sol) for c in w.coeffs)) for w in images)
            free = tuple(sorted({s for w in imgs for c in w.coeffs for s in sp.sympify(c).free_symbols},
                                key=lambda s: s.name))
            points.append(QuotientPoint(C, imgs, free))
        points.append(QuotientPoint(C, tuple(WeilElement.scalar(b, k) for b in base)))
    unique = {}
    for p in points:
        unique.setdefault(p.images, p)
    return list(unique.values())


def _weil_weil_points(m: int, k: int) -> list[WeilPointOfWeil]:
    vs = [sp.Symbol(f"v_{j}", real=True) for j in range(1, k + 1)]
    image = WeilElement((0, *vs)) if k else WeilElement((0,))
    cond = image ** (m + 1) if k else image
    points = []
    for sol in _solve_nilpotent_conditions(list(cond.coeffs), vs):
        img = WeilElement(tuple(sp.sympify(c).subs(sol) for c in image.coeffs))
        free = tuple(sorted({s for c in img.coeffs for s in sp.sympify(c).free_symbols}, key=lambda s: s.name))
        points.append(WeilPointOfWeil(m, img, free))
    return points


def _default_directions(dim: int) -> list[tuple]:
    dirs = [tuple(1 if i == j else 0 for i in range(dim)) for j in range(dim)]
    dirs.append(tuple(1 for _ in range(dim)))
    return dirs


def _grid_subsample(grid: np.ndarray, max_points: int) -> np.ndarray:
    if grid.shape[0] <= max_points:
        return grid
    idx = np.linspace(0, grid.shape[0] - 1, max_points).round().astype(int)
    return grid[idx]


def _jet_points(C: CoordinateAlgebra, k: int, directions, max_points: int) -> list[JetPoint]:
    chart = C.chart
    dirs = list(directions or _default_directions(chart.dim))
    prm = tuple(chart.param_midpoint()[p] for p in chart.param_names)
    zero = tuple(0 for _ in range(chart.dim))
    points = []
    for row in _grid_subsample(C.grid, max_points):
        base = tuple(float(v) for v in row)
        points.append(JetPoint(chart, base, (zero,) * k, prm))
        for d in dirs:
            points.append(JetPoint(chart, base, (tuple(d),) + (zero,) * (k - 1), prm))
    return points


def _grassmann_points(C, stage: GrassmannStage, directions, max_points: int) -> list:
    chart = C.chart
    dirs = list(directions or _default_directions(chart.dim))
    prm = tuple(chart.param_midpoint()[p] for p in chart.param_names)
    points = []
    for row in _grid_subsample(C.grid, max_points):
        base = tuple(sp.nsimplify(float(v), rational=True) for v in row)
        real = CoordinatePoint(chart, tuple(float(v) for v in row), prm)
        points.append(ScaledPoint(real, stage))
        for d in dirs:
            for a in stage.nilpotents():
                points.append(GrassmannPoint(chart, base, tuple(d), a, prm))
    return points


# --------------------------------------------------------------------------
# Ghost ideals

@dataclass
class GhostReport:
    algebra: str
    stage: str
    points_enumerated: int
    kernel_basis: list
    geometric: bool
    witness: str | None = None
    method: str = "exact"
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "algebra": self.algebra,
            "stage": self.stage,
            "points_enumerated": self.points_enumerated,
            "kernel_basis": [_element_str(k) for k in self.kernel_basis],
            "geometric": self.geometric,
            "witness": self.witness,
            "method": self.method,
            "notes": list(self.notes),
        }


def _element_str(x) -> str:
    if isinstance(x, GrassmannFunction):
        return format_grassmann(x.element).replace("**", "^")
    return str(x).replace("**", "^")


def _stage_vector(value, stage: Stage) -> list[sp.Expr]:
    if isinstance(stage, RealStage):
        return [sp.sympify(value)]
    if isinstance(stage, WeilAlgebra):
        return [sp.sympify(c) for c in value.coeffs]
    raise UnsupportedPresentation("exact kernels are computed at real and Weil stages")


def _exact_kernel(C, points: list, stage: Stage) -> tuple[list[list[sp.Expr]], int]:
    """Null space of the stacked evaluation functionals; returns (basis vectors, rank)."""
    basis = C.basis
    d = len(basis)
    rows: list[list[sp.Expr]] = []
    for pt in points:
        free = list(getattr(pt, "free", ()))
        images = [_stage_vector(pt(b), stage) for b in basis]
        for comp in range(len(images[0]) if images else 0):
            entries = [sp.expand(images[j][comp]) for j in range(d)]
            if free:
                polys = [sp.Poly(e, *free) for e in entries]
                monos = sorted({m for p in polys for m in p.monoms()})
                for mono in monos:
                    rows.append([p.coeff_monomial(mono) for p in polys])
            else:
                rows.append(entries)
    if d == 0:
        return [], 0
    M = sp.Matrix(rows) if rows else sp.zeros(0, d)
    null = M.nullspace() if rows else [sp.eye(d)[:, j] for j in range(d)]
    rank = d - len(null)
    vecs = [list(v) for v in null]
    # every kernel vector must be annihilated by every enumerated point
    for v in vecs:
        el = C.from_coordinates(v)
        for pt in points:
            assert all(sp.expand(c) == 0 for c in _stage_vector(pt(el), stage)), "kernel vector not annihilated"
    return vecs, rank


def ghost_ideal(C: AlgebraPresentation, stage: Stage | None = None, *, tol: float = VANISH_TOL) -> GhostReport:
    """``J = intersection of ker(rho)`` over the point family at ``stage``."""
    stage = as_stage(stage)
    if isinstance(C, (QuotientAlgebra, WeilAlgebra)):
        pts = stage_points(C, stage)
        vecs, _ = _exact_kernel(C, pts, stage)
        kernel = [C.from_coordinates(v) for v in vecs]
        if isinstance(C, QuotientAlgebra):
            kernel = [C.reduce(k) for k in kernel]
        notes = []
        if any(getattr(p, "free", ()) for p in pts):
            notes.append("points form parametrised families; kernel taken over every parameter value")
        return GhostReport(C.describe(), stage.describe(), len(pts), kernel, not kernel,
                           _element_str(kernel[0]) if kernel else None, "exact", notes)
    if isinstance(C, CoordinateAlgebra):
        return _grid_kernel(C, stage, C.probe_family(), tol)
    if isinstance(C, GrassmannFunctionAlgebra):
        return _grid_kernel(C, stage, C.probe_family(), tol)
    raise UnsupportedPresentation(f"no ghost computation for {type(C).__name__}")


def _is_nonzero_element(f) -> bool:
    if isinstance(f, GrassmannFunction):
        return any(simplify(c) != 0 for c in f.components.values())
    return simplify(f) != 0


def _grid_kernel(C, stage: Stage, probes: list, tol: float) -> GhostReport:
    """Probe elements that vanish at every stage point of the grid family."""
    chart = C.chart
    grid = C.grid
    kernel = []
    for f in probes:
        if not _is_nonzero_element(f):
            continue
        if _vanishes_on_grid(f, chart, grid, stage, tol):
            kernel.append(f)
    n_points = grid.shape[0] * _stage_multiplicity(chart, stage)
    notes = [f"decided on a {C.density}^{chart.dim} grid over {len(probes)} probe elements, tol {tol:g}"]
    return GhostReport(C.describe(), stage.describe(), n_points, kernel, not kernel,
                       _element_str(kernel[0]) if kernel else None, "grid", notes)


def _stage_multiplicity(chart: Chart, stage: Stage) -> int:
    if isinstance(stage, RealStage):
        return 1
    dirs = len(_default_directions(chart.dim))
    if isinstance(stage, WeilAlgebra):
        return 1 + dirs
    return 1 + dirs * len(stage.nilpotents())


def _directional(f: sp.Expr, chart: Chart, d: Sequence) -> sp.Expr:
    return sum((sp.Integer(int(di)) * sp.diff(f, s) for di, s in zip(d, chart.symbols) if di), sp.Integer(0))


def _vanishes_on_grid(f, chart: Chart, grid: np.ndarray, stage: Stage, tol: float) -> bool:
    """Numeric version of the stage-point family on the full grid."""
    if isinstance(f, GrassmannFunction):
        comps = f.components
        body = sp.sympify(comps.get((), 0))
        if isinstance(stage, RealStage) or isinstance(stage, GrassmannStage):
            # every real, scaled and chi_{v,a} point only sees the body
            exprs = [body]
            if isinstance(stage, GrassmannStage):
                exprs += [_directional(body, chart, d) for d in _default_directions(chart.dim)]
        else:
            raise UnsupportedPresentation("Grassmann function algebras are checked at real or Grassmann stages")
    else:
        exprs = [sp.sympify(f)]
        if isinstance(stage, WeilAlgebra):
            for d in _default_directions(chart.dim):
                term = sp.sympify(f)
                for j in range(1, stage.order + 1):
                    term = _directional(term, chart, d)
                    exprs.append(term / sp.factorial(j))
        elif isinstance(stage, GrassmannStage):
            exprs += [_directional(f, chart, d) for d in _default_directions(chart.dim)]
    for e in exprs:
        vals = compile_numeric(e, chart)(grid)
        if np.any(~np.isfinite(vals)) or np.max(np.abs(vals)) > tol:
            return False
    return True


def is_geometric_at_stage(C: AlgebraPresentation, stage: Stage) -> tuple[bool, GhostReport]:
    report = ghost_ideal(C, stage)
    return report.geometric, report


# --------------------------------------------------------------------------
# Morphism laws

def morphism_defects(point, f, g, k=3) -> dict[str, object]:
    """Differences ``rho(kf+g) - k rho(f) - rho(g)``, ``rho(fg) - rho(f)rho(g)``, ``rho(1) - 1``."""
    one = _unit_like(f)
    lin = point(k * f + g) - (point(f) * k + point(g))
    mul = point(f * g) - point(f) * point(g)
    unit = point(one) - 1
    return {"additive": lin, "multiplicative": mul, "unital": unit}


def _unit_like(f):
    if isinstance(f, WeilElement):
        return WeilElement.scalar(1, f.order)
    if isinstance(f, GrassmannFunction):
        return grassmann_function({(): 1}, f.chart, f.q)
    return sp.Integer(1)


# --------------------------------------------------------------------------
# Sikorski superposition closure (condition (a) only)

ALL_EXPRESSIONS = object()
BINARY = {"add": lambda a, b: a + b, "mul": lambda a, b: a * b}


@dataclass(frozen=True)
class ScClosure:
    closure: frozenset
    added: tuple
    depth: int
    closed: bool

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "closed": self.closed,
            "size": len(self.closure) if self.closure is not None else "all",
            "added": [_element_str(a) for a in self.added],
        }


def sc_closure(generators, library: Sequence[str] = ("sin",), depth: int = 1) -> ScClosure:
    """Close a finite function set under superposition with ``library`` up to ``depth``.

    Library entries are unary primitive names or the binary operations
    ``add``/``mul``.  ``closed`` means one round of superposition adds
    nothing, i.e. ``sc D = D`` within the library.
    """
    if generators is ALL_EXPRESSIONS:
        return ScClosure(None, (), depth, True)
    for name in library:
        if name not in PRIMITIVES and name not in BINARY:
            raise ExprError(f"unknown superposition {name!r}")
    start = frozenset(simplify(sp.sympify(g)) for g in generators)
    current = set(start)
    one_round = None
    for level in range(depth):
        new = set()
        members = sorted(current, key=sp.default_sort_key)
        for name in library:
            if name in BINARY:
                for a, b in itertools.combinations_with_replacement(members, 2):
                    new.add(simplify(BINARY[name](a, b)))
            else:
                for a in members:
                    new.add(simplify(PRIMITIVES[name](a)))
        if level == 0:
            one_round = new - current
        current |= new
    added = tuple(sorted(current - start, key=sp.default_sort_key))
    closed = not one_round if depth > 0 else True
    return ScClosure(frozenset(current), added, depth, closed)
