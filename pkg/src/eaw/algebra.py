"""Stage algebras: truncated Weil algebras and Grassmann algebras.

Coefficients are generic: ints, :class:`fractions.Fraction`, floats or
sympy expressions all work, as long as they support ring arithmetic.
"""

from __future__ import annotations

import enum
import functools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
import sympy as sp

from . import _kernels
from .expr import PRIMITIVES, Chart, ExprError, evaluate, parse, parse_over, simplify, symbol


class AlgebraError(ValueError):
    pass


def _is_zero(c) -> bool:
    # structural test only; call simplify first when cancellation matters
    return c == 0


def _exact(c):
    """Promote exact Python numbers to sympy so symbolic coefficients mix cleanly."""
    if isinstance(c, Fraction):
        return sp.Rational(c.numerator, c.denominator)
    if isinstance(c, int) and not isinstance(c, bool):
        return sp.Integer(c)
    return c


# --------------------------------------------------------------------------
# Weil algebras R[e]/(e^(k+1))

@dataclass(frozen=True)
class WeilElement:
    """``c0 + c1 e + ... + ck e^k`` with ``e^(k+1) = 0``."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if not self.coeffs:
            raise AlgebraError("a Weil element needs at least the real coefficient")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def scalar(cls, c, order: int) -> "WeilElement":
        return cls((c,) + (0,) * order)

    @classmethod
    def epsilon(cls, order: int) -> "WeilElement":
        if order < 1:
            raise AlgebraError("e vanishes in the order-0 Weil algebra")
        return cls((0, 1) + (0,) * (order - 1))

    @property
    def real_part(self):
        return self.coeffs[0]

    @property
    def nilpotent_part(self) -> "WeilElement":
        return WeilElement((0,) + self.coeffs[1:])

    def _coerce(self, other) -> "WeilElement":
        if isinstance(other, WeilElement):
            if other.order != self.order:
                raise AlgebraError(f"Weil orders differ: {self.order} vs {other.order}")
            return other
        if isinstance(other, GrassmannElement):
            raise TypeError("cannot mix Weil and Grassmann elements")
        return WeilElement.scalar(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return WeilElement(a + b for a, b in zip(self.coeffs, other.coeffs))

    __radd__ = __add__

    def __neg__(self):
        return WeilElement(-a for a in self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, WeilElement):
            if isinstance(other, GrassmannElement):
                return NotImplemented
            return WeilElement(a * other for a in self.coeffs)
        return weil_mul(self, other)

    def __rmul__(self, other):
        return WeilElement(other * a for a in self.coeffs)

    def __pow__(self, n: int):
        if not isinstance(n, (int, sp.Integer)):
            return weil_apply_power(self, n)
        n = int(n)
        if n < 0:
            return self.inverse() ** (-n)
        out = WeilElement.scalar(1, self.order)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def inverse(self) -> "WeilElement":
        a = self.real_part
        if _is_zero(a):
            raise ZeroDivisionError("a Weil element with zero real part is not invertible")
        inv_a = _reciprocal(a)
        step = self.nilpotent_part * (-inv_a)
        out = WeilElement.scalar(1, self.order)
        term = WeilElement.scalar(1, self.order)
        for _ in range(self.order):
            term = term * step
            out = out + term
        return out * inv_a

    def __truediv__(self, other):
        if isinstance(other, WeilElement):
            return self * other.inverse()
        return self * _reciprocal(other)

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def simplify(self) -> "WeilElement":
        return WeilElement(simplify(c) if isinstance(c, sp.Basic) else c for c in self.coeffs)

    def is_zero(self) -> bool:
        return all(_is_zero(simplify(c) if isinstance(c, sp.Basic) else c) for c in self.coeffs)

    def evalf(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])

    def __str__(self):
        return format_weil(self)


def _reciprocal(a):
    if isinstance(a, int) and not isinstance(a, bool):
        return Fraction(1, a)
    if isinstance(a, Fraction):
        return 1 / a
    if isinstance(a, sp.Basic):
        return sp.Integer(1) / a
    return 1.0 / a


def weil_mul(a: WeilElement, b: WeilElement) -> WeilElement:
    """Cauchy product of coefficient vectors, truncated above degree k."""
    if not isinstance(a, WeilElement) or not isinstance(b, WeilElement):
        raise TypeError("weil_mul expects two Weil elements")
    if a.order != b.order:
        raise AlgebraError(f"Weil orders differ: {a.order} vs {b.order}")
    k = a.order
    out = []
    for d in range(k + 1):
        terms = [a.coeffs[i] * b.coeffs[d - i] for i in range(d + 1)
                 if not _is_zero(a.coeffs[i]) and not _is_zero(b.coeffs[d - i])]
        out.append(sum(terms[1:], terms[0]) if terms else 0)
    return WeilElement(out)


def _taylor_apply(f_of_t, t, w: WeilElement) -> WeilElement:
    """``f(a + n) = sum_j f^(j)(a) n^j / j!`` for ``w = a + n``; exact when ``a`` is."""
    a = w.real_part
    a_is_float = isinstance(a, float) or isinstance(a, np.floating)
    a_sym = sp.Float(a) if a_is_float else sp.sympify(_exact(a))
    n = w.nilpotent_part
    out = WeilElement.scalar(0, w.order)
    power = WeilElement.scalar(1, w.order)
    deriv = f_of_t
    for j in range(w.order + 1):
        c = deriv.subs(t, a_sym) / math.factorial(j)
        if c.has(sp.zoo, sp.nan) or c.is_real is False:
            raise ExprError(f"{f_of_t} is not smooth at {a}")
        c = float(c) if a_is_float else c
        out = out + power * c
        power = power * n
        deriv = sp.diff(deriv, t)
    return out


_T = sp.Dummy("t", real=True)


def weil_apply(name: str, w: WeilElement) -> WeilElement:
    """Apply a primitive smooth function to a Weil number."""
    fn = PRIMITIVES.get(name)
    if fn is None:
        raise ExprError(f"{name!r} is not a primitive")
    if name == "log" and _is_float_nonpositive(w.real_part):
        raise ExprError("log of non-positive real part")
    return _taylor_apply(fn(_T), _T, w)


def weil_apply_power(w: WeilElement, exponent) -> WeilElement:
    return _taylor_apply(_T ** sp.sympify(exponent), _T, w)


def _is_float_nonpositive(a) -> bool:
    try:
        return float(a) <= 0
    except TypeError:
        return False


def weil_evaluate(e: sp.Expr, env: Mapping[sp.Symbol, object], order: int) -> WeilElement:
    """Evaluate a sympy expression with symbols bound to Weil numbers.

    Every node is pushed through the algebra, so compositions obey
    ``rho(w(f1..fn)) = w(rho(f1)..rho(fn))``.
    """
    e = sp.sympify(e)

    def walk(node):
        if node.is_Symbol:
            try:
                val = env[node]
            except KeyError:
                raise ExprError(f"unbound symbol {node.name!r}") from None
            return val if isinstance(val, WeilElement) else WeilElement.scalar(val, order)
        if node.is_Number or node.is_NumberSymbol:
            return WeilElement.scalar(node, order)
        if node.is_Add:
            parts = [walk(a) for a in node.args]
            return sum(parts[1:], parts[0])
        if node.is_Mul:
            parts = [walk(a) for a in node.args]
            out = parts[0]
            for p in parts[1:]:
                out = out * p
            return out
        if node.is_Pow:
            base = walk(node.base)
            if node.exp.is_Integer:
                return base ** int(node.exp)
            return weil_apply_power(base, node.exp)
        name = getattr(node.func, "__name__", "")
        if name in PRIMITIVES and len(node.args) == 1:
            return weil_apply(name, walk(node.args[0]))
        raise ExprError(f"cannot lift {node.func}")

    return walk(e)


def _join_terms(pairs) -> str:
    """Render ``(coeff, monomial)`` pairs as a signed sum; ``monomial`` is '' for the constant."""
    out = ""
    for c, mono in pairs:
        cs = str(c).replace("**", "^")
        neg = False
        if getattr(c, "is_number", False) or isinstance(c, (int, float, Fraction)):
            neg = c < 0
            if neg:
                cs = str(-c).replace("**", "^")
        elif cs.startswith("-") and not any(ch in cs[1:] for ch in "+-"):
            neg, cs = True, cs[1:]
        if mono:
            if cs == "1":
                body = mono
            else:
                body = f"({cs})*{mono}" if any(ch in cs for ch in "+- ") else f"{cs}*{mono}"
        else:
            body = cs
        if not out:
            out = f"-{body}" if neg else body
        else:
            out += f" - {body}" if neg else f" + {body}"
    return out or "0"


def format_weil(w: WeilElement) -> str:
    return _join_terms((c, "" if j == 0 else ("e" if j == 1 else f"e^{j}"))
                       for j, c in enumerate(w.coeffs) if not _is_zero(c))


def parse_weil(text: str, order: int, chart: Chart | None = None) -> WeilElement:
    """Parse the text form ``"3 + 2*e"``; ``e`` denotes the nilpotent generator."""
    names = {n: symbol(n) for n in (chart.param_names + chart.coords if chart else ())}
    names["e"] = WeilElement.epsilon(order)
    funcs = {name: (lambda fn, nm: lambda x: weil_apply(nm, x) if isinstance(x, WeilElement) else fn(x))(fn, name)
             for name, fn in PRIMITIVES.items()}
    out = parse_over(text, names, funcs)
    if not isinstance(out, WeilElement):
        out = WeilElement.scalar(out, order)
    return out


# --------------------------------------------------------------------------
# Grassmann algebras

class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"
    NONHOMOGENEOUS = "nonhomogeneous"

    @property
    def alpha(self) -> int:
        if self is Parity.NONHOMOGENEOUS:
            raise AlgebraError("parity function is defined for homogeneous elements only")
        return 0 if self is Parity.EVEN else 1


def subset_to_mask(indices: Iterable[int]) -> int:
    idx = tuple(indices)
    if list(idx) != sorted(set(idx)):
        raise AlgebraError(f"generator indices must be strictly increasing, got {idx}")
    mask = 0
    for i in idx:
        if i < 1:
            raise AlgebraError("generators are numbered from 1")
        mask |= 1 << (i - 1)
    return mask


def mask_to_subset(mask: int) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


@dataclass(frozen=True)
class GrassmannElement:
    """Element of the Grassmann algebra on ``q`` generators.

    ``terms`` is the ordered normal form: ``(mask, coeff)`` pairs sorted by
    mask, zero coefficients dropped, bit ``i-1`` of a mask standing for
    ``xi_i``.
    """

    q: int
    terms: tuple = ()

    def __post_init__(self):
        if self.q < 0:
            raise AlgebraError("generator count must be nonnegative")
        merged: dict[int, object] = {}
        for mask, c in self.terms:
            if mask >> self.q:
                raise AlgebraError(f"monomial {mask_to_subset(mask)} uses generators beyond q={self.q}")
            merged[mask] = merged[mask] + c if mask in merged else c
        clean = tuple(sorted((m, c) for m, c in merged.items() if not _is_zero(c)))
        object.__setattr__(self, "terms", clean)

    @classmethod
    def from_components(cls, q: int, components: Mapping) -> "GrassmannElement":
        """Build from ``{(i1, i2, ...): coeff}`` with strictly increasing index tuples."""
        terms = []
        for key, c in components.items():
            mask = key if isinstance(key, int) else subset_to_mask(key)
            terms.append((mask, c))
        return cls(q, tuple(terms))

    @classmethod
    def generator(cls, i: int, q: int) -> "GrassmannElement":
        if not 1 <= i <= q:
            raise AlgebraError(f"generator index {i} outside 1..{q}")
        return cls(q, ((1 << (i - 1), 1),))

    @classmethod
    def scalar(cls, c, q: int) -> "GrassmannElement":
        return cls(q, ((0, c),))

    @classmethod
    def monomial(cls, mask: int, q: int, coeff=1) -> "GrassmannElement":
        return cls(q, ((mask, coeff),))

    @property
    def components(self) -> dict[tuple[int, ...], object]:
        return {mask_to_subset(m): c for m, c in self.terms}

    def coefficient(self, mask: int):
        for m, c in self.terms:
            if m == mask:
                return c
        return 0

    @property
    def body(self):
        return self.coefficient(0)

    def is_nilpotent(self) -> bool:
        return _is_zero(self.body)

    def parity(self) -> Parity:
        return parity(self)

    def graded_part(self, alpha: int) -> "GrassmannElement":
        return GrassmannElement(self.q, tuple((m, c) for m, c in self.terms if m.bit_count() % 2 == alpha))

    def _coerce(self, other) -> "GrassmannElement":
        if isinstance(other, GrassmannElement):
            if other.q != self.q:
                raise AlgebraError(f"generator counts differ: {self.q} vs {other.q}")
            return other
        if isinstance(other, WeilElement):
            raise TypeError("cannot mix Grassmann and Weil elements")
        return GrassmannElement.scalar(other, self.q)

    def __add__(self, other):
        other = self._coerce(other)
        return GrassmannElement(self.q, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.q, tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, GrassmannElement):
            return grassmann_mul(self, other)
        if isinstance(other, WeilElement):
            return NotImplemented
        return GrassmannElement(self.q, tuple((m, c * other) for m, c in self.terms))

    def __rmul__(self, other):
        return GrassmannElement(self.q, tuple((m, other * c) for m, c in self.terms))

    def __pow__(self, n: int):
        n = int(n)
        if n < 0:
            raise AlgebraError("negative powers are not supported for Grassmann elements")
        out = GrassmannElement.scalar(1, self.q)
        for _ in range(n):
            out = out * self
        return out

    def simplify(self) -> "GrassmannElement":
        return GrassmannElement(self.q, tuple((m, simplify(c) if isinstance(c, sp.Basic) else c) for m, c in self.terms))

    def __str__(self):
        return format_grassmann(self)


def grassmann_mul(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Bilinear product with ``xi_I xi_J = sign(I, J) xi_(I u J)`` for disjoint ``I, J``."""
    if a.q != b.q:
        raise AlgebraError(f"generator counts differ: {a.q} vs {b.q}")
    acc: dict[int, object] = {}
    for ma, ca in a.terms:
        for mb, cb in b.terms:
            s = _kernels.merge_sign(ma, mb)
            if s == 0:
                continue
            term = ca * cb if s > 0 else -(ca * cb)
            m = ma | mb
            acc[m] = acc[m] + term if m in acc else term
    return GrassmannElement(a.q, tuple(acc.items()))


def parity(a: GrassmannElement) -> Parity:
    degrees = {m.bit_count() % 2 for m, _ in a.terms}
    if degrees <= {0}:
        return Parity.EVEN
    if degrees == {1}:
        return Parity.ODD
    return Parity.NONHOMOGENEOUS


MAX_CENTER_Q = 12


def center(q: int) -> list[GrassmannElement]:
    """Basis monomials spanning the centre, found by brute-force commutation.

    A monomial is kept iff it commutes with every basis monomial.  Because
    commutators of distinct monomials land on distinct monomials, these span
    the whole centre.
    """
    if not 1 <= q <= MAX_CENTER_Q:
        raise AlgebraError(f"q must lie in 1..{MAX_CENTER_Q}, got {q}")
    flags = _kernels.central_flags(q)
    return [GrassmannElement.monomial(m, q) for m in range(1 << q) if flags[m]]


def even_basis(q: int) -> list[GrassmannElement]:
    return [GrassmannElement.monomial(m, q) for m in range(1 << q) if m.bit_count() % 2 == 0]


def center_excess(q: int) -> list[GrassmannElement]:
    """Central monomials that are not even (nonempty exactly for odd ``q``)."""
    return [m for m in center(q) if parity(m) is not Parity.EVEN]


def to_dense(a: GrassmannElement) -> np.ndarray:
    out = np.zeros(1 << a.q, dtype=object)
    for m, c in a.terms:
        out[m] = c
    return out


def _from_float(c):
    c = float(c)
    return sp.Integer(int(c)) if c.is_integer() else c


def from_dense(v, q: int) -> GrassmannElement:
    """Inverse of :func:`to_dense`; integral floats come back as exact integers."""
    return GrassmannElement(q, tuple((m, _from_float(v[m])) for m in range(1 << q) if v[m] != 0))


@functools.lru_cache(maxsize=None)
def product_tables(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Sign and result-mask tables for every pair of basis monomials."""
    sign, mask = _kernels.grassmann_tables(q)
    sign.setflags(write=False)
    mask.setflags(write=False)
    return sign, mask


def dense_mul(x: np.ndarray, y: np.ndarray, q: int) -> np.ndarray:
    """Product of two float coefficient vectors of length ``2**q`` via the table kernel."""
    sign, mask = product_tables(q)
    return _kernels.grassmann_mul_dense(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64),
                                        sign, mask)


def format_grassmann(a: GrassmannElement) -> str:
    return _join_terms((c, "^".join(f"g{i}" for i in mask_to_subset(m))) for m, c in a.terms)


_WEDGE = re.compile(r"(\bg\d+)\s*\^\s*(?=g\d+\b)")


def parse_grassmann(text: str, q: int, chart: Chart | None = None) -> GrassmannElement:
    """Parse ``"1 + x^2*g1^g2"``; ``gi`` is ``xi_i`` and ``^`` between generators is the wedge."""
    text = _WEDGE.sub(r"\1*", text)
    names: dict[str, object] = {n: symbol(n) for n in (chart.param_names + chart.coords if chart else ())}
    for i in range(1, q + 1):
        names[f"g{i}"] = GrassmannElement.generator(i, q)

    def scalar_only(fn):
        def call(x):
            if isinstance(x, GrassmannElement):
                raise AlgebraError("primitive functions apply to scalar coefficients only")
            return fn(x)
        return call

    out = parse_over(text, names, {k: scalar_only(v) for k, v in PRIMITIVES.items()})
    if not isinstance(out, GrassmannElement):
        out = GrassmannElement.scalar(out, q)
    return out


# --------------------------------------------------------------------------
# Grassmann-valued functions C(M, Lambda)

@dataclass(frozen=True)
class GrassmannFunction:
    """``f(x, xi) = sum_I f_I(x) xi_I`` with component functions over a chart."""

    chart: Chart
    q: int
    terms: tuple = ()

    def __post_init__(self):
        tmp = GrassmannElement(self.q, tuple((m, sp.sympify(c)) for m, c in self.terms))
        object.__setattr__(self, "terms", tmp.terms)

    @property
    def element(self) -> GrassmannElement:
        return GrassmannElement(self.q, self.terms)

    @property
    def components(self) -> dict[tuple[int, ...], sp.Expr]:
        return self.element.components

    @property
    def body(self) -> sp.Expr:
        """``f(x, 0)``: the unit component."""
        return sp.sympify(self.element.body)

    def at(self, bindings: Mapping[str, object], params: Mapping[str, object] | None = None) -> GrassmannElement:
        """Pointwise value; exact when every bound value is exact."""
        values = dict(params or {})
        values.update(bindings)
        if all(isinstance(v, (int, Fraction, sp.Rational)) for v in values.values()):
            subs = {symbol(k): sp.sympify(_exact(v)) for k, v in values.items()}
            return GrassmannElement(self.q, tuple((m, c.subs(subs)) for m, c in self.terms))
        return GrassmannElement(self.q, tuple((m, evaluate(c, bindings, params)) for m, c in self.terms))

    def graded_part(self, alpha: int) -> "GrassmannFunction":
        return GrassmannFunction(self.chart, self.q, self.element.graded_part(alpha).terms)

    @property
    def even_part(self) -> "GrassmannFunction":
        return self.graded_part(0)

    @property
    def odd_part(self) -> "GrassmannFunction":
        return self.graded_part(1)

    def _wrap(self, el: GrassmannElement) -> "GrassmannFunction":
        return GrassmannFunction(self.chart, self.q, tuple((m, sp.expand(c)) for m, c in el.terms))

    def __add__(self, other):
        other_el = other.element if isinstance(other, GrassmannFunction) else other
        return self._wrap(self.element + other_el)

    def __mul__(self, other):
        other_el = other.element if isinstance(other, GrassmannFunction) else other
        return self._wrap(self.element * other_el)

    def __neg__(self):
        return self._wrap(-self.element)

    def __sub__(self, other):
        return self + (-other)


def grassmann_function(components: Mapping, chart: Chart, q: int | None = None) -> GrassmannFunction:
    """Build a Grassmann-valued function from ``{index subset: expression}``.

    Keys are tuples of strictly increasing generator indices (``()`` is the
    body); values are expressions or strings in the expression grammar.
    """
    terms = []
    top = 0
    for key, value in components.items():
        mask = key if isinstance(key, int) else subset_to_mask(key)
        top = max(top, mask.bit_length())
        expr = parse(value, chart) if isinstance(value, str) else sp.sympify(value)
        terms.append((mask, expr))
    q = top if q is None else q
    if top > q:
        raise AlgebraError(f"components need {top} generators but q={q}")
    return GrassmannFunction(chart, q, tuple(terms))
