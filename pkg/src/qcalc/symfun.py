"""Sparse multivariate polynomials over a cyclotomic field.

Polynomials play the role of smooth coefficient functions on a chart: every
identity checked by this package is a polynomial identity, so exact equality
replaces numerical tolerances.  Axes are 0-based in the API and ``x1 .. xn`` in
text.
"""
from __future__ import annotations

import random
import re
from fractions import Fraction
from itertools import product

from .scalar import CycScalar, CyclotomicField, MismatchedOrder

__all__ = [
    "CoeffPoly",
    "PolyMap",
    "MismatchedArity",
    "AxisOutOfRange",
    "NonInvertibleChart",
    "random_poly",
    "parse_poly",
    "compose",
]


class MismatchedArity(ValueError):
    pass


class AxisOutOfRange(IndexError):
    pass


class NonInvertibleChart(ValueError):
    pass


class CoeffPoly:
    """Immutable polynomial ``{exponent tuple: CycScalar}`` with no zero entries."""

    __slots__ = ("field", "nvars", "terms", "_hash")

    def __init__(self, fld: CyclotomicField, nvars: int, terms=None):
        self.field = fld
        self.nvars = nvars
        clean = {}
        if terms:
            for exp, c in terms.items():
                if len(exp) != nvars:
                    raise MismatchedArity(f"exponent {exp} for {nvars} variables")
                if c:
                    clean[tuple(exp)] = c
        self.terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, fld: CyclotomicField, nvars: int, value) -> CoeffPoly:
        return cls(fld, nvars, {(0,) * nvars: fld.coerce(value)})

    @classmethod
    def zero(cls, fld: CyclotomicField, nvars: int) -> CoeffPoly:
        return cls(fld, nvars)

    @classmethod
    def variable(cls, fld: CyclotomicField, nvars: int, axis: int) -> CoeffPoly:
        if not 0 <= axis < nvars:
            raise AxisOutOfRange(f"axis {axis} outside 0..{nvars - 1}")
        exp = [0] * nvars
        exp[axis] = 1
        return cls(fld, nvars, {tuple(exp): fld.one()})

    @classmethod
    def _raw(cls, fld, nvars, terms) -> CoeffPoly:
        # trusted constructor: terms already canonical
        obj = cls.__new__(cls)
        obj.field = fld
        obj.nvars = nvars
        obj.terms = terms
        obj._hash = None
        return obj

    # -- queries ------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and not any(next(iter(self.terms))))

    def constant_value(self) -> CycScalar:
        return self.terms.get((0,) * self.nvars, self.field.zero())

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def __eq__(self, other):
        if isinstance(other, CoeffPoly):
            return (
                self.field is other.field
                and self.nvars == other.nvars
                and self.terms == other.terms
            )
        if isinstance(other, (int, Fraction, CycScalar)):
            return self == CoeffPoly.constant(self.field, self.nvars, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self.terms.items())))
        return self._hash

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> CoeffPoly | None:
        if isinstance(other, CoeffPoly):
            if other.nvars != self.nvars:
                raise MismatchedArity(f"{self.nvars} vs {other.nvars} variables")
            if other.field is not self.field:
                raise MismatchedOrder(f"{self.field} vs {other.field}")
            return other
        if isinstance(other, (int, Fraction, CycScalar)):
            return CoeffPoly.constant(self.field, self.nvars, other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not o.terms:
            return self
        if not self.terms:
            return o
        out = dict(self.terms)
        for e, c in o.terms.items():
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s = s + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return CoeffPoly._raw(self.field, self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return CoeffPoly._raw(
            self.field, self.nvars, {e: -c for e, c in self.terms.items()}
        )

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> CoeffPoly:
        s = self.field.coerce(s) if not isinstance(s, (int, Fraction)) else s
        if not s:
            return CoeffPoly._raw(self.field, self.nvars, {})
        return CoeffPoly._raw(
            self.field, self.nvars, {e: c * s for e, c in self.terms.items()}
        )

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, CycScalar)):
            return self.scale(other)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in o.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                p = c1 * c2
                s = out.get(e)
                out[e] = p if s is None else s + p
        return CoeffPoly(self.field, self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> CoeffPoly:
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = CoeffPoly.constant(self.field, self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- calculus -----------------------------------------------------
    def partial(self, axis: int) -> CoeffPoly:
        if not 0 <= axis < self.nvars:
            raise AxisOutOfRange(f"axis {axis} outside 0..{self.nvars - 1}")
        out = {}
        for e, c in self.terms.items():
            k = e[axis]
            if k:
                ne = list(e)
                ne[axis] = k - 1
                out[tuple(ne)] = c * k
        return CoeffPoly._raw(self.field, self.nvars, out)

    def antiderivative(self, axis: int = 0) -> CoeffPoly:
        out = {}
        for e, c in self.terms.items():
            ne = list(e)
            ne[axis] += 1
            out[tuple(ne)] = c * Fraction(1, ne[axis])
        return CoeffPoly._raw(self.field, self.nvars, out)

    def substitute(self, values) -> CoeffPoly:
        """Substitute polynomials (any common arity) for every variable."""
        if len(values) != self.nvars:
            raise MismatchedArity(f"need {self.nvars} substitutions, got {len(values)}")
        if not values:
            return self
        target = values[0]
        result = CoeffPoly.zero(self.field, target.nvars)
        powers: list[dict[int, CoeffPoly]] = [{} for _ in values]

        def power(i, k):
            cache = powers[i]
            if k not in cache:
                cache[k] = values[i] ** k
            return cache[k]

        for e, c in self.terms.items():
            term = CoeffPoly.constant(self.field, target.nvars, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    def evaluate(self, point):
        """Exact evaluation at a point of rationals or CycScalars."""
        if len(point) != self.nvars:
            raise MismatchedArity(f"point of length {len(point)} for {self.nvars} variables")
        total = self.field.zero()
        for e, c in self.terms.items():
            val = c
            for x, k in zip(point, e):
                if k:
                    val = val * (x ** k)
            total = total + val
        return total

    def to_float_function(self):
        """Return ``f(point) -> float`` for a polynomial with rational coefficients."""
        items = []
        for e, c in self.terms.items():
            if not c.is_rational():
                raise ValueError(f"coefficient {c} is not real-rational")
            items.append((float(c.to_fraction()), e))

        def f(point):
            total = 0.0
            for c, e in items:
                v = c
                for x, k in zip(point, e):
                    if k:
                        v *= x ** k
                total += v
            return total

        return f

    # -- text ---------------------------------------------------------
    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: (-sum(t[0]), tuple(-k for k in t[0])))

    def to_string(self, names=None) -> str:
        if not self.terms:
            return "0"
        names = names or [f"x{i + 1}" for i in range(self.nvars)]
        pieces = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                names[i] if k == 1 else f"{names[i]}^{k}" for i, k in enumerate(e) if k
            )
            if c.is_rational():
                v = c.to_fraction()
                sign = "-" if v < 0 else "+"
                mag = abs(v)
                if mono:
                    body = mono if mag == 1 else f"{mag}*{mono}"
                else:
                    body = str(mag)
            else:
                sign = "+"
                body = f"({c})" + (f"*{mono}" if mono else "")
            pieces.append((sign, body))
        out = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __str__(self) -> str:
        return self.to_string()

    def __repr__(self) -> str:
        return f"CoeffPoly(N={self.field.order}, n={self.nvars}, '{self}')"


def random_poly(
    seed: int, nvars: int, maxdeg: int, order: int = 3, height: int = 5
) -> CoeffPoly:
    """Deterministic pseudo-random polynomial with small rational coefficients."""
    if maxdeg < 0:
        raise ValueError("maxdeg must be >= 0")
    rng = random.Random(seed)
    fld = CyclotomicField(order)
    terms = {}
    for e in product(range(maxdeg + 1), repeat=nvars):
        if sum(e) > maxdeg:
            continue
        if rng.random() < 0.6:
            num = rng.randint(-height, height)
            den = rng.randint(1, 3)
            if num:
                terms[e] = fld.rational(Fraction(num, den))
    return CoeffPoly(fld, nvars, terms)


class PolyMap:
    """Polynomial chart change with an exact polynomial inverse.

    ``forward[k]`` gives new coordinate ``y^k`` as a function of ``x``;
    ``inverse[k]`` gives ``x^k`` as a function of ``y``.
    """

    def __init__(self, forward, inverse, check: bool = True):
        self.forward = tuple(forward)
        self.inverse = tuple(inverse)
        if len(self.forward) != len(self.inverse):
            raise MismatchedArity("forward and inverse have different lengths")
        self.n = len(self.forward)
        self.field = self.forward[0].field
        for p in self.forward + self.inverse:
            if p.nvars != self.n:
                raise MismatchedArity("chart components must have n variables")
        if check and not self.is_inverse_pair():
            raise NonInvertibleChart("forward and inverse maps do not compose to identity")

    def is_inverse_pair(self) -> bool:
        ident = [CoeffPoly.variable(self.field, self.n, i) for i in range(self.n)]
        fi = [f.substitute(list(self.inverse)) for f in self.forward]
        if fi != ident:
            return False
        return [g.substitute(list(self.forward)) for g in self.inverse] == ident

    @classmethod
    def identity(cls, n: int, order: int = 3) -> PolyMap:
        fld = CyclotomicField(order)
        xs = [CoeffPoly.variable(fld, n, i) for i in range(n)]
        return cls(xs, xs)

    @classmethod
    def affine(cls, matrix, offset=None, order: int = 3) -> PolyMap:
        """``y = A x + b`` with rational invertible ``A``."""
        fld = CyclotomicField(order)
        n = len(matrix)
        ainv = _rational_inverse(matrix)
        b = [Fraction(v) for v in (offset or [0] * n)]
        xs = [CoeffPoly.variable(fld, n, i) for i in range(n)]
        fwd, inv = [], []
        for r in range(n):
            f = CoeffPoly.constant(fld, n, b[r])
            g = CoeffPoly.zero(fld, n)
            for c in range(n):
                f = f + xs[c] * Fraction(matrix[r][c])
                g = g + xs[c] * ainv[r][c]
            inv_off = sum(ainv[r][c] * b[c] for c in range(n))
            fwd.append(f)
            inv.append(g - inv_off)
        return cls(fwd, inv)

    @classmethod
    def shear(cls, n: int, target: int, source: int, power: int = 2,
              coeff=1, order: int = 3) -> PolyMap:
        """``y^target = x^target + c (x^source)^power``, other coordinates fixed."""
        if target == source:
            raise NonInvertibleChart("shear needs distinct axes")
        fld = CyclotomicField(order)
        xs = [CoeffPoly.variable(fld, n, i) for i in range(n)]
        extra = (xs[source] ** power) * Fraction(coeff)
        fwd = list(xs)
        inv = list(xs)
        fwd[target] = xs[target] + extra
        inv[target] = xs[target] - extra
        return cls(fwd, inv)

    def compose_after(self, other: PolyMap) -> PolyMap:
        """Chart ``x -> z`` obtained by applying ``self`` (x -> y) then ``other`` (y -> z)."""
        fwd = [f.substitute(list(self.forward)) for f in other.forward]
        inv = [g.substitute(list(other.inverse)) for g in self.inverse]
        return PolyMap(fwd, inv)

    def jacobian_inverse(self):
        """``U[i][j] = d x^i / d y^j`` as polynomials in ``y``."""
        return [[self.inverse[i].partial(j) for j in range(self.n)] for i in range(self.n)]

    def jacobian_forward(self):
        """``V[i][j] = d y^i / d x^j`` as polynomials in ``x``."""
        return [[self.forward[i].partial(j) for j in range(self.n)] for i in range(self.n)]


def _rational_inverse(matrix):
    n = len(matrix)
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise NonInvertibleChart("singular affine chart")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def compose(f: CoeffPoly, m: PolyMap, direction: str = "forward") -> CoeffPoly:
    """Pull ``f`` through the chart.

    ``forward``: ``f`` is a function of ``y``; returns ``f(y(x))``.
    ``inverse``: ``f`` is a function of ``x``; returns ``f(x(y))``.
    """
    if f.nvars != m.n:
        raise MismatchedArity(f"function of {f.nvars} variables, chart of {m.n}")
    if direction == "forward":
        return f.substitute(list(m.forward))
    if direction == "inverse":
        return f.substitute(list(m.inverse))
    raise ValueError(f"unknown direction {direction!r}")


# -- parsing --------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()−]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"unexpected character at {pos} in {text!r}")
        pos = m.end()
        if m.group("num"):
            out.append(("num", m.group("num")))
        elif m.group("name"):
            out.append(("name", m.group("name")))
        else:
            op = m.group("op")
            out.append(("op", "-" if op == "−" else op))
    return out


class _Parser:
    def __init__(self, text, fld, nvars, names):
        self.toks = _tokenize(text)
        self.i = 0
        self.fld = fld
        self.n = nvars
        self.names = names
        self.text = text

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ValueError(f"expected {op!r} in {self.text!r}")

    def parse(self):
        if not self.toks:
            raise ValueError("empty polynomial")
        val = self.expr()
        if self.i != len(self.toks):
            raise ValueError(f"trailing input in {self.text!r}")
        return val

    def expr(self):
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            left = self.term()
            if val == "-":
                left = -left
        else:
            left = self.term()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                right = self.term()
                left = left + right if val == "+" else left - right
            else:
                return left

    def term(self):
        left = self.power()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                right = self.power()
                if val == "*":
                    left = left * right
                else:
                    if not right.is_constant() or right.is_zero():
                        raise ValueError(f"division by a non-constant or zero in {self.text!r}")
                    left = left * right.constant_value().inverse()
            else:
                return left

    def power(self):
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, num = self.take()
            if kind != "num" or "." in num:
                raise ValueError(f"exponent must be a non-negative integer in {self.text!r}")
            exp = int(num)
            if base.is_constant() and not base.is_zero():
                return CoeffPoly.constant(self.fld, self.n, base.constant_value() ** exp)
            return base ** exp
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return CoeffPoly.constant(self.fld, self.n, Fraction(val))
        if kind == "name":
            if val == "q":
                return CoeffPoly.constant(self.fld, self.n, self.fld.q)
            if val == "z":
                return CoeffPoly.constant(self.fld, self.n, self.fld.zeta_power(1))
            if val in self.names:
                return CoeffPoly.variable(self.fld, self.n, self.names.index(val))
            m = re.fullmatch(r"x(\d+)", val)
            if m and 1 <= int(m.group(1)) <= self.n:
                return CoeffPoly.variable(self.fld, self.n, int(m.group(1)) - 1)
            raise ValueError(f"unknown symbol {val!r} in {self.text!r}")
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "op" and val == "-":
            return -self.power()
        raise ValueError(f"unexpected token {val!r} in {self.text!r}")


def parse_poly(text: str, nvars: int, order: int = 3, names=None) -> CoeffPoly:
    """Parse e.g. ``"2*x1^2*x2 + (1+q)*x3 - 1/2"``."""
    fld = CyclotomicField(order)
    return _Parser(str(text), fld, nvars, list(names or [])).parse()
