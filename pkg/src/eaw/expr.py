"""Symbolic scalar expressions over named coordinates.

Expressions are plain immutable :mod:`sympy` trees restricted to a fixed
library of smooth primitives.  This module owns the text grammar, exact
differentiation, a best-effort simplifier with a numeric fallback verdict,
and floating-point evaluation (scalar and vectorised).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import sympy as sp

ScalarExpr = sp.Expr

DEFAULT_SEED = 0xE1A5
DEFAULT_RANGE = (0.5, 1.5)

PRIMITIVES: dict[str, Callable] = {
    "exp": sp.exp,
    "log": sp.log,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "sqrt": sp.sqrt,
    "atan": sp.atan,
}
CONSTANTS = {"pi": sp.pi, "π": sp.pi}

_TRIG = (sp.sin, sp.cos, sp.tan, sp.sinh, sp.cosh)


class ExprError(Exception):
    pass


class ParseError(ExprError):
    """Syntax error; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownSymbolError(ParseError):
    def __init__(self, symbol: str, offset: int):
        super().__init__(f"unknown symbol {symbol!r}", offset)
        self.symbol = symbol


class UnboundSymbolError(ExprError):
    def __init__(self, symbol: str):
        super().__init__(f"unbound symbol {symbol!r}")
        self.symbol = symbol


class DomainError(ExprError, ArithmeticError):
    pass


def symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, real=True)


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names plus sampling metadata.

    ``ranges`` holds one ``(lo, hi)`` pair per coordinate; bounds may be
    expressions in the parameters (e.g. ``2.5*M``).  ``params`` maps each
    named parameter to a closed sampling interval; a fixed value is an
    interval of zero width.
    """

    coords: tuple[str, ...]
    ranges: tuple[tuple[sp.Expr, sp.Expr], ...] = ()
    params: tuple[tuple[str, float, float], ...] = ()

    def __post_init__(self):
        coords = tuple(self.coords)
        if not coords:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        params = []
        for item in self.params:
            if isinstance(item, str):
                item = (item, 1.0, 1.0)
            name, lo, hi = item
            params.append((str(name), float(lo), float(hi)))
        pnames = [p[0] for p in params]
        if set(pnames) & set(coords) or len(set(pnames)) != len(pnames):
            raise ValueError("parameter names must be distinct from each other and from coordinates")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "params", tuple(params))
        ranges = tuple(self.ranges) or (DEFAULT_RANGE,) * len(coords)
        if len(ranges) != len(coords):
            raise ValueError("one range per coordinate is required")
        param_chart = _ParamScope(tuple(pnames))
        norm = []
        for lo, hi in ranges:
            norm.append((_bound(lo, param_chart), _bound(hi, param_chart)))
        object.__setattr__(self, "ranges", tuple(norm))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(symbol(c) for c in self.coords)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p[0] for p in self.params)

    @property
    def param_symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(symbol(p) for p in self.param_names)

    def index(self, coord) -> int:
        name = coord.name if isinstance(coord, sp.Symbol) else str(coord)
        try:
            return self.coords.index(name)
        except ValueError:
            raise ExprError(f"{name!r} is not a coordinate of chart {self.coords}") from None

    def param_midpoint(self) -> dict[str, float]:
        return {name: 0.5 * (lo + hi) for name, lo, hi in self.params}

    def bounds(self, param_values: Mapping[str, float] | None = None) -> list[tuple[float, float]]:
        pv = self.param_midpoint() if param_values is None else dict(param_values)
        return [(evaluate(lo, {}, pv), evaluate(hi, {}, pv)) for lo, hi in self.ranges]

    def sample(self, count: int, seed: int = DEFAULT_SEED) -> tuple[np.ndarray, np.ndarray]:
        """Uniform random points: ``(coords[count, dim], params[count, nparams])``."""
        rng = np.random.default_rng(seed)
        prm = np.empty((count, len(self.params)))
        for j, (_, lo, hi) in enumerate(self.params):
            prm[:, j] = rng.uniform(lo, hi, count) if hi > lo else lo
        pts = np.empty((count, self.dim))
        for i, (lo, hi) in enumerate(self.ranges):
            lo_v = _bound_values(lo, self, prm)
            hi_v = _bound_values(hi, self, prm)
            pts[:, i] = lo_v + (hi_v - lo_v) * rng.uniform(0.0, 1.0, count)
        return pts, prm

    def grid(self, density: int) -> np.ndarray:
        """Cell-centred regular grid with ``density**dim`` points at midpoint parameters."""
        axes = []
        for lo, hi in self.bounds():
            step = (hi - lo) / density
            axes.append(lo + step * (np.arange(density) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def midpoint_params_array(self, count: int) -> np.ndarray:
        mid = self.param_midpoint()
        return np.tile([mid[p] for p in self.param_names], (count, 1)).reshape(count, len(self.params))


@dataclass(frozen=True)
class _ParamScope:
    param_names: tuple[str, ...]

    @property
    def coords(self):
        return ()


def _bound(value, scope) -> sp.Expr:
    if isinstance(value, sp.Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return sp.Rational(value)
    if isinstance(value, float):
        return sp.nsimplify(value, rational=True)
    return parse(str(value), scope)


def _bound_values(bound: sp.Expr, chart: Chart, prm: np.ndarray) -> np.ndarray:
    fn = sp.lambdify(chart.param_symbols, bound, modules="numpy")
    vals = fn(*prm.T) if len(chart.params) else fn()
    return np.broadcast_to(np.asarray(vals, dtype=float), (prm.shape[0],))


# --------------------------------------------------------------------------
# Parsing

class _Tok(NamedTuple):
    kind: str
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[^\W\d]\w*)"
    r"|(?P<op>[-+*/^(),]))",
    re.UNICODE,
)


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.lastgroup is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    """Recursive descent over the expression grammar.

    Unary minus binds looser than ``^`` so ``-x^2`` reads as ``-(x^2)``.
    """

    def __init__(self, text: str, names: Mapping[str, sp.Expr], functions: Mapping[str, Callable]):
        self.text = text
        self.divisors: list[sp.Expr] = []
        self.toks = _tokenize(text)
        self.i = 0
        self.names = names
        self.functions = functions

    def error(self, msg, tok=None):
        tok = tok or self.toks[self.i]
        return ParseError(msg, _byte_offset(self.text, tok.pos))

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, text=None, kind=None) -> _Tok:
        tok = self.toks[self.i]
        if (text is not None and tok.text != text) or (kind is not None and tok.kind != kind):
            want = text or kind
            got = tok.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        self.i += 1
        return tok

    def parse(self):
        if self.peek().kind == "end":
            raise self.error("empty expression")
        node = self.expr()
        if self.peek().kind != "end":
            raise self.error(f"unexpected {self.peek().text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.take().text
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op_tok = self.take()
            rhs = self.unary()
            if op_tok.text == "*":
                node = node * rhs
            else:
                if _is_provably_zero(rhs):
                    raise DomainError(f"division by zero at byte {_byte_offset(self.text, op_tok.pos)}")
                self.divisors.append(rhs)
                node = node / rhs
        return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("-", "+"):
            self.take()
            operand = self.unary()
            return -operand if tok.text == "-" else operand
        return self.power()

    def power(self):
        base = self.base()
        if self.peek().text == "^" and self.peek().kind == "op":
            self.take()
            sign = 1
            if self.peek().text in ("-", "+") and self.peek().kind == "op":
                sign = -1 if self.take().text == "-" else 1
            tok = self.peek()
            if tok.kind != "num" or not tok.text.isdigit():
                raise self.error("exponent must be an integer literal")
            self.take()
            exp = sign * int(tok.text)
            if exp < 0 and _is_provably_zero(base):
                raise DomainError(f"division by zero at byte {_byte_offset(self.text, tok.pos)}")
            if exp < 0:
                self.divisors.append(base)
            base = base ** exp
        return base

    def base(self):
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return sp.Rational(Fraction(tok.text))
        if tok.kind == "ident":
            self.take()
            if self.peek().text == "(":
                fn = self.functions.get(tok.text)
                if fn is None:
                    raise UnknownSymbolError(tok.text, _byte_offset(self.text, tok.pos))
                self.take("(")
                args = [self.expr()]
                while self.peek().text == ",":
                    self.take(",")
                    args.append(self.expr())
                self.take(")")
                if len(args) != 1:
                    raise ParseError(f"{tok.text} takes exactly one argument", _byte_offset(self.text, tok.pos))
                return fn(args[0])
            if tok.text in self.names:
                return self.names[tok.text]
            raise UnknownSymbolError(tok.text, _byte_offset(self.text, tok.pos))
        if tok.text == "(":
            self.take("(")
            node = self.expr()
            self.take(")")
            return node
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")


def _is_provably_zero(e) -> bool:
    return isinstance(e, sp.Expr) and e.is_zero is True


def name_table(chart, extra: Iterable[str] = ()) -> dict[str, sp.Expr]:
    names: dict[str, sp.Expr] = dict(CONSTANTS)
    for n in tuple(getattr(chart, "param_names", ())) + tuple(chart.coords) + tuple(extra):
        names[n] = symbol(n)
    return names


def parse(text: str, chart, extra: Iterable[str] = ()) -> sp.Expr:
    """Parse ``text`` over the coordinates and parameters of ``chart``.

    ``extra`` admits additional free symbol names (used by the algebra
    literals and loop definitions).
    """
    return parse_with_domain(text, chart, extra).expr


def parse_over(text: str, names: Mapping[str, object], functions: Mapping[str, Callable] | None = None):
    """Run the grammar with caller-supplied values for names and functions.

    Operators are applied with plain Python arithmetic, so any object that
    implements ``+ - * **`` (Weil or Grassmann elements) can stand in for a
    symbol.
    """
    table = dict(CONSTANTS)
    table.update(names)
    return _Parser(text, table, PRIMITIVES if functions is None else functions).parse()


def parse_with_domain(text: str, chart, extra: Iterable[str] = ()) -> "Simplified":
    """Parse and also report the divisors the text assumes nonzero.

    Tree construction already cancels ``x/x`` to ``1``; the divisor list keeps
    the ``x != 0`` condition that cancellation drops.
    """
    parser = _Parser(text, name_table(chart, extra), PRIMITIVES)
    result = parser.parse()
    if result.has(sp.zoo, sp.nan):
        raise DomainError(f"expression {text!r} divides by zero")
    factors = set()
    for d in parser.divisors:
        factors.update(_factors(d))
    return Simplified(sp.sympify(result), tuple(sorted(factors, key=sp.default_sort_key)))


# --------------------------------------------------------------------------
# Calculus and simplification

def differentiate(e: sp.Expr, coord) -> sp.Expr:
    var = coord if isinstance(coord, sp.Symbol) else symbol(str(coord))
    return sp.diff(e, var)


def _to_library(e: sp.Expr) -> sp.Expr:
    """Rewrite functions sympy may introduce back into the primitive library."""
    return e.replace(sp.cot, lambda a: sp.cos(a) / sp.sin(a)).replace(
        sp.sec, lambda a: 1 / sp.cos(a)).replace(
        sp.csc, lambda a: 1 / sp.sin(a)).replace(
        sp.tanh, lambda a: sp.sinh(a) / sp.cosh(a)).replace(
        sp.coth, lambda a: sp.cosh(a) / sp.sinh(a))


def _trig_expanded(e: sp.Expr) -> sp.Expr:
    e = sp.expand_trig(e.replace(sp.tan, lambda a: sp.sin(a) / sp.cos(a)))
    return sp.trigsimp(sp.cancel(e))


def _simplify_once(e: sp.Expr) -> sp.Expr:
    e = sp.cancel(e)
    if e.has(*_TRIG):
        # two trig strategies; keep the smaller result (first wins ties)
        a = sp.cancel(_to_library(sp.trigsimp(e)))
        b = sp.cancel(_to_library(_trig_expanded(e)))
        e = b if sp.count_ops(b) < sp.count_ops(a) else a
    return e


def simplify(e: sp.Expr, max_rounds: int = 6) -> sp.Expr:
    """Normal form by rational-function cancellation plus trigonometric rules.

    Iterated to a fixed point so the result is stable under a second call.
    Raises :class:`DomainError` if a denominator collapses to zero.
    """
    e = sp.sympify(e)
    if e.is_Number:
        return e
    cur = e
    for _ in range(max_rounds):
        nxt = _simplify_once(cur)
        if nxt.has(sp.zoo, sp.nan):
            raise DomainError(f"{e} divides by a denominator that simplifies to zero")
        if nxt == cur:
            break
        cur = nxt
    return cur


@dataclass(frozen=True)
class Simplified:
    expr: sp.Expr
    nonzero: tuple[sp.Expr, ...]   # factors cancelled away; the result assumes each is nonzero


def _factors(e) -> set[sp.Expr]:
    """Non-constant irreducible factors of the numerator of ``e`` (whole numerator if not polynomial)."""
    num = sp.fraction(sp.together(sp.sympify(e)))[0]
    try:
        parts = [f for f, _ in sp.factor_list(num)[1]]
    except sp.PolynomialError:
        parts = [num]
    return {f for f in parts if f.free_symbols}


def _denominator_factors(e: sp.Expr) -> set[sp.Expr]:
    out = set()
    for node in sp.preorder_traversal(e):
        if isinstance(node, sp.Pow) and node.exp.is_negative:
            out.update(_factors(node.base))
    return out


def simplify_with_notes(e: sp.Expr) -> Simplified:
    before = _denominator_factors(sp.sympify(e))
    result = simplify(e)
    after = _denominator_factors(result)
    dropped = sorted(before - after, key=sp.default_sort_key)
    return Simplified(result, tuple(dropped))


def check_library(e: sp.Expr) -> None:
    """Raise ``ExprError`` if ``e`` uses anything outside the primitive library."""
    allowed = (sp.exp, sp.log, sp.sin, sp.cos, sp.tan, sp.sinh, sp.cosh, sp.atan)
    for node in sp.preorder_traversal(e):
        if isinstance(node, (sp.Symbol, sp.Number, sp.Add, sp.Mul)) or node in (sp.pi, sp.E):
            continue
        if isinstance(node, sp.Pow):
            if node.exp.is_Rational:
                continue
            raise ExprError(f"non-rational exponent in {node}")
        if isinstance(node, allowed):
            continue
        raise ExprError(f"{type(node).__name__} is outside the primitive library")


# --------------------------------------------------------------------------
# Evaluation

_MATH = {
    sp.exp: math.exp,
    sp.sin: math.sin,
    sp.cos: math.cos,
    sp.tan: math.tan,
    sp.sinh: math.sinh,
    sp.cosh: math.cosh,
    sp.atan: math.atan,
}


def evaluate(e: sp.Expr, bindings: Mapping[str, float], params: Mapping[str, float] | None = None) -> float:
    """Floating evaluation at a point; a real point of the coordinate algebra.

    >>> evaluate(parse("1 - 2*M/r", Chart(("r",), params=("M",))), {"r": 4}, {"M": 1})
    0.5
    """
    env = {symbol(k): float(v) for k, v in (params or {}).items()}
    env.update({symbol(k): float(v) for k, v in bindings.items()})
    return _eval(sp.sympify(e), env)


def _eval(node, env) -> float:
    if node.is_Number:
        if node in (sp.zoo, sp.nan, sp.oo, -sp.oo):
            raise DomainError(f"non-finite constant {node}")
        return float(node)
    if node.is_NumberSymbol:
        return float(node)
    if node.is_Symbol:
        try:
            return env[node]
        except KeyError:
            raise UnboundSymbolError(node.name) from None
    if node.is_Add:
        return math.fsum(_eval(a, env) for a in node.args)
    if node.is_Mul:
        out = 1.0
        for a in node.args:
            out *= _eval(a, env)
        return out
    if node.is_Pow:
        base = _eval(node.base, env)
        ex = node.exp
        if ex.is_Integer:
            n = int(ex)
            if n < 0 and base == 0.0:
                raise DomainError("division by zero")
            return base ** n
        x = _eval(ex, env)
        if base < 0 or (base == 0 and x < 0):
            raise DomainError(f"{base} ** {x} is not real")
        return base ** x
    if isinstance(node, sp.log):
        x = _eval(node.args[0], env)
        if x <= 0:
            raise DomainError(f"log of non-positive value {x}")
        return math.log(x)
    fn = _MATH.get(node.func)
    if fn is None:
        raise ExprError(f"cannot evaluate {node.func}")
    return fn(_eval(node.args[0], env))


def compile_numeric(e: sp.Expr, chart: Chart) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Vectorised evaluator ``f(coords[N, dim], params[N, p]) -> values[N]``."""
    fn = sp.lambdify(chart.symbols + chart.param_symbols, e, modules="numpy")

    def run(pts: np.ndarray, prm: np.ndarray | None = None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if prm is None:
            prm = chart.midpoint_params_array(pts.shape[0])
        args = list(pts.T) + list(np.atleast_2d(prm).reshape(pts.shape[0], -1).T)
        with np.errstate(all="ignore"):
            out = fn(*args)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    return run


# --------------------------------------------------------------------------
# Zero testing

@dataclass(frozen=True)
class ZeroVerdict:
    kind: str            # "symbolic-zero" | "numeric-zero" | "nonzero"
    max_residual: float
    samples: int
    witness: dict | None = None

    @property
    def is_zero(self) -> bool:
        return self.kind != "nonzero"


def zero_verdict(
    exprs: sp.Expr | Sequence[sp.Expr],
    chart: Chart,
    *,
    samples: int = 200,
    tol: float = 1e-9,
    seed: int = DEFAULT_SEED,
    numeric_only: bool = False,
) -> ZeroVerdict:
    """Decide whether every expression vanishes on the chart.

    Symbolic simplification is tried first; anything left over is sampled at
    ``samples`` seeded random points and judged against ``tol`` (absolute).
    """
    items = [sp.sympify(exprs)] if isinstance(exprs, sp.Basic) else [sp.sympify(x) for x in exprs]
    if not numeric_only:
        leftovers = [x for x in (simplify(x) for x in items) if x != 0]
        if not leftovers:
            return ZeroVerdict("symbolic-zero", 0.0, 0)
    else:
        leftovers = items
    pts, prm = chart.sample(samples, seed)
    worst, where = 0.0, 0
    for x in leftovers:
        vals = np.abs(compile_numeric(x, chart)(pts, prm))
        vals = np.where(np.isfinite(vals), vals, np.inf)
        j = int(np.argmax(vals))
        if vals[j] > worst or where is None:
            worst, where = float(vals[j]), j
    if worst < tol:
        return ZeroVerdict("numeric-zero", worst, samples)
    witness = {c: float(pts[where, i]) for i, c in enumerate(chart.coords)}
    witness.update({p: float(prm[where, i]) for i, p in enumerate(chart.param_names)})
    return ZeroVerdict("nonzero", worst, samples, witness)


def free_names(e: sp.Expr) -> set[str]:
    return {s.name for s in sp.sympify(e).free_symbols}
