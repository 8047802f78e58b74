"""Exact arithmetic in cyclotomic fields and the q-number towers.

Elements of ``Q(q)``, ``q`` a primitive ``N``-th root of unity, are stored as
rational residues modulo the cyclotomic polynomial.  For odd ``N`` the field is
``Q(zeta_N)`` and ``q = zeta_N``; for even ``N`` the field is ``Q(zeta_2N)`` and
``q = zeta_2N^2`` so that a square root of ``q`` is available exactly.
"""
from __future__ import annotations

import re
import threading
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "CyclotomicField",
    "CycScalar",
    "DivisionByZero",
    "MismatchedOrder",
    "IndexOutOfRange",
    "field",
    "QNumberTower",
    "q_number",
    "alpha_coeff",
    "gaussian_binomial",
]


class DivisionByZero(ZeroDivisionError):
    pass


class MismatchedOrder(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


def _poly_divmod(a, b):
    """Integer polynomial division by a monic divisor (coefficients low→high)."""
    a = list(a)
    q = [0] * max(len(a) - len(b) + 1, 1)
    db = len(b) - 1
    for k in range(len(a) - 1, db - 1, -1):
        c = a[k]
        if c:
            q[k - db] = c
            for j in range(len(b)):
                a[k - db + j] -= c * b[j]
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return q, a


@lru_cache(maxsize=None)
def cyclotomic_polynomial(m: int) -> tuple[int, ...]:
    """Integer coefficients of Phi_m, lowest degree first."""
    num = [-1] + [0] * (m - 1) + [1]  # x^m - 1
    for d in range(1, m):
        if m % d == 0:
            num, rem = _poly_divmod(num, cyclotomic_polynomial(d))
            assert not any(rem)
    while len(num) > 1 and num[-1] == 0:
        num.pop()
    return tuple(num)


class CyclotomicField:
    """``Q(zeta_M)`` hosting a primitive ``N``-th root of unity ``q``."""

    _instances: dict[int, CyclotomicField] = {}
    _lock = threading.Lock()

    def __new__(cls, order: int):
        if order < 2:
            raise ValueError(f"root-of-unity order must be >= 2, got {order}")
        with cls._lock:
            inst = cls._instances.get(order)
            if inst is None:
                inst = super().__new__(cls)
                inst._setup(order)
                cls._instances[order] = inst
        return inst

    def __getnewargs__(self):
        return (self.order,)

    def _setup(self, order: int) -> None:
        self.order = order
        self.conductor = 2 * order if order % 2 == 0 else order
        self.modulus = cyclotomic_polynomial(self.conductor)
        self.degree = len(self.modulus) - 1
        # x^k for k < 2*degree, reduced to the power basis
        self._reduce = []
        for k in range(2 * self.degree - 1):
            vec = [0] * (k + 1)
            vec[k] = 1
            _, r = _poly_divmod(vec, self.modulus)
            r = r + [0] * (self.degree - len(r))
            self._reduce.append(tuple(r[: self.degree]))
        self._zeta_pows = {}

    def __repr__(self) -> str:
        return f"CyclotomicField({self.order})"

    def __reduce__(self):
        return (CyclotomicField, (self.order,))

    # -- constructors -------------------------------------------------
    def zero(self) -> CycScalar:
        return CycScalar(self, (Fraction(0),) * self.degree)

    def one(self) -> CycScalar:
        return self.rational(1)

    def rational(self, value) -> CycScalar:
        c = [Fraction(0)] * self.degree
        c[0] = Fraction(value)
        return CycScalar(self, tuple(c))

    def zeta_power(self, k: int) -> CycScalar:
        """``zeta_M^k`` for the field generator ``zeta_M``."""
        k %= self.conductor
        cached = self._zeta_pows.get(k)
        if cached is None:
            if k < self.degree:
                c = [Fraction(0)] * self.degree
                c[k] = Fraction(1)
                cached = CycScalar(self, tuple(c))
            else:
                cached = self.zeta_power(k - 1) * self.zeta_power(1)
            self._zeta_pows[k] = cached
        return cached

    def q_power(self, k: int) -> CycScalar:
        step = self.conductor // self.order
        return self.zeta_power(step * k)

    @property
    def q(self) -> CycScalar:
        return self.q_power(1)

    def sqrt_q(self) -> CycScalar:
        """A fixed square root of ``q``: ``zeta_2N`` for even N, ``q^((N+1)/2)`` for odd N."""
        if self.order % 2 == 0:
            return self.zeta_power(1)
        return self.q_power((self.order + 1) // 2)

    def coerce(self, value) -> CycScalar:
        if isinstance(value, CycScalar):
            if value.field is not self:
                raise MismatchedOrder(f"{value.field} vs {self}")
            return value
        if isinstance(value, (int, Fraction)):
            return self.rational(value)
        raise TypeError(f"cannot coerce {type(value).__name__} into {self}")

    def parse(self, text: str) -> CycScalar:
        return CycScalar.parse(text, self.order)


def field(order: int) -> CyclotomicField:
    return CyclotomicField(order)


_TERM = re.compile(
    r"""^\s*(?P<coef>[0-9]+(?:/[0-9]+)?)?\s*\*?\s*
        (?:(?P<var>[qz])(?:\s*\^\s*(?P<exp>[0-9]+))?)?\s*$""",
    re.VERBOSE,
)


class CycScalar:
    """Immutable element of a cyclotomic field."""

    __slots__ = ("field", "coeffs", "_hash")

    def __init__(self, fld: CyclotomicField, coeffs):
        self.field = fld
        self.coeffs = tuple(coeffs)
        self._hash = None
        if len(self.coeffs) != fld.degree:
            raise ValueError("coefficient vector has wrong length")

    @property
    def order(self) -> int:
        return self.field.order

    # -- predicates -------------------------------------------------
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __bool__(self) -> bool:
        return any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def to_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is not rational")
        return self.coeffs[0]

    def __eq__(self, other):
        if isinstance(other, CycScalar):
            return self.field is other.field and self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and self.coeffs[0] == other
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.field.order, self.coeffs))
        return self._hash

    # -- arithmetic -------------------------------------------------
    def _other(self, other) -> CycScalar | None:
        if isinstance(other, CycScalar):
            if other.field is not self.field:
                raise MismatchedOrder(
                    f"cannot combine elements of {self.field} and {other.field}"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return self.field.rational(other)
        return None

    def __add__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return CycScalar(self.field, [a + b for a, b in zip(self.coeffs, o.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return CycScalar(self.field, [-a for a in self.coeffs])

    def __sub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return CycScalar(self.field, [a - b for a, b in zip(self.coeffs, o.coeffs)])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return CycScalar(self.field, [a * other for a in self.coeffs])
        o = self._other(other)
        if o is None:
            return NotImplemented
        a, b = self.coeffs, o.coeffs
        if not any(b[1:]):
            s = b[0]
            return CycScalar(self.field, [x * s for x in a])
        if not any(a[1:]):
            s = a[0]
            return CycScalar(self.field, [x * s for x in b])
        deg = self.field.degree
        red = self.field._reduce
        out = [Fraction(0)] * deg
        for i, x in enumerate(a):
            if not x:
                continue
            for j, y in enumerate(b):
                if not y:
                    continue
                prod = x * y
                k = i + j
                if k < deg:
                    out[k] += prod
                else:
                    for t, r in enumerate(red[k]):
                        if r:
                            out[t] += r * prod
        return CycScalar(self.field, out)

    __rmul__ = __mul__

    def inverse(self) -> CycScalar:
        """Multiplicative inverse via the extended Euclidean algorithm over Q."""
        if self.is_zero():
            raise DivisionByZero("inverse of zero in a cyclotomic field")
        if self.is_rational():
            return self.field.rational(1 / self.coeffs[0])
        a = [Fraction(c) for c in self.field.modulus]
        b = list(self.coeffs)
        # invariants: s0*self = r0, s1*self = r1 (mod modulus)
        r0, r1 = _trim(a), _trim(b)
        s0, s1 = [Fraction(0)], [Fraction(1)]
        while len(r1) > 1 or r1[0] != 0:
            quo, rem = _frac_divmod(r0, r1)
            r0, r1 = r1, rem
            s0, s1 = s1, _trim(_sub(s0, _fmul(quo, s1)))
            if len(r1) == 1 and r1[0] == 0:
                break
        # r0 is a nonzero constant
        c = r0[0]
        inv = [x / c for x in s0]
        _, red = _frac_divmod(inv, [Fraction(x) for x in self.field.modulus])
        red = red + [Fraction(0)] * (self.field.degree - len(red))
        return CycScalar(self.field, red[: self.field.degree])

    def __truediv__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = self.field.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- text form --------------------------------------------------
    def __repr__(self) -> str:
        return f"CycScalar({self.order}, '{self}')"

    def __str__(self) -> str:
        var = "z" if self.field.order % 2 == 0 else "q"
        parts = []
        for k, c in enumerate(self.coeffs):
            if not c:
                continue
            mag = abs(c)
            sign = "-" if c < 0 else "+"
            if k == 0:
                body = str(mag)
            else:
                mono = var if k == 1 else f"{var}^{k}"
                body = mono if mag == 1 else f"{mag}*{mono}"
            parts.append((sign, body))
        if not parts:
            return "0"
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    @classmethod
    def parse(cls, text: str, order: int) -> CycScalar:
        """Parse ``"a0 + a1*q + a2*q^2"``; ``z`` denotes the field generator."""
        fld = CyclotomicField(order)
        s = text.replace("\u2212", "-").replace(" ", "")
        if not s:
            raise ValueError("empty scalar")
        total = fld.zero()
        pos = 0
        for m in re.finditer(r"([+-]?)([^+-]+)", s):
            if m.start() != pos:
                raise ValueError(f"bad scalar {text!r}")
            pos = m.end()
            t = _TERM.match(m.group(2))
            if not t or (t.group("coef") is None and t.group("var") is None):
                raise ValueError(f"bad scalar term {m.group(2)!r} in {text!r}")
            coef = Fraction(t.group("coef")) if t.group("coef") else Fraction(1)
            exp = int(t.group("exp")) if t.group("exp") else 1
            if t.group("var") is None:
                term = fld.rational(coef)
            elif t.group("var") == "q":
                term = fld.q_power(exp) * coef
            else:
                term = fld.zeta_power(exp) * coef
            total = total - term if m.group(1) == "-" else total + term
        if pos != len(s):
            raise ValueError(f"bad scalar {text!r}")
        return total


def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _sub(a, b):
    n = max(len(a), len(b))
    a = list(a) + [Fraction(0)] * (n - len(a))
    b = list(b) + [Fraction(0)] * (n - len(b))
    return [x - y for x, y in zip(a, b)]


def _fmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _frac_divmod(a, b):
    a = _trim(a)
    b = _trim(b)
    if len(a) < len(b):
        return [Fraction(0)], a
    quo = [Fraction(0)] * (len(a) - len(b) + 1)
    rem = list(a)
    lead = b[-1]
    for k in range(len(a) - len(b), -1, -1):
        c = rem[k + len(b) - 1] / lead
        quo[k] = c
        if c:
            for j, y in enumerate(b):
                rem[k + j] -= c * y
    rem = _trim(rem[: len(b) - 1] or [Fraction(0)])
    return quo, rem


def gaussian_binomial(n: int, k: int, fld: CyclotomicField) -> CycScalar:
    """Gaussian binomial coefficient evaluated at ``q`` (Pascal recursion)."""
    if k < 0 or k > n:
        return fld.zero()
    row = [fld.one()]
    for m in range(1, n + 1):
        new = [fld.one()]
        for j in range(1, m):
            new.append(row[j - 1] + fld.q_power(j) * row[j])
        new.append(fld.one())
        row = new
    return row[k]


class QNumberTower:
    """The towers ``[l]^{(i)}_q`` for a fixed N.

    ``[l]^{(0)} = 1 + q + ... + q^(l-1)`` and
    ``[l]^{(i)} = sum_{k=1..l} q^(k-1) [k]^{(i-1)}``.
    """

    def __init__(self, order: int):
        self.N = order
        self.field = CyclotomicField(order)
        self._cache: dict[tuple[int, int], CycScalar] = {}
        self._lock = threading.Lock()

    def __call__(self, l: int, i: int) -> CycScalar:
        return self.value(l, i)

    def value(self, l: int, i: int) -> CycScalar:
        if l < 1 or i < 0:
            raise IndexOutOfRange(f"q-number [{l}]^({i}) undefined")
        key = (l, i)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        fld = self.field
        if i == 0:
            val = fld.zero()
            for k in range(l):
                val = val + fld.q_power(k)
        else:
            val = fld.zero()
            for k in range(1, l + 1):
                val = val + fld.q_power(k - 1) * self.value(k, i - 1)
        with self._lock:
            self._cache[key] = val
        return val


_towers: dict[int, QNumberTower] = {}
_towers_lock = threading.Lock()


def _tower(order: int) -> QNumberTower:
    with _towers_lock:
        t = _towers.get(order)
        if t is None:
            t = _towers[order] = QNumberTower(order)
    return t


def q_number(l: int, i: int, order: int) -> CycScalar:
    return _tower(order).value(l, i)


def alpha_coeff(l: int, i: int, a: int, order: int) -> CycScalar:
    """Coefficient of ``G^(l-i) B G^i`` in ``d^l B`` for ``B`` of grade ``a``.

    ``alpha = (-1)^i q^sigma [l-i+1]^{(i-1)}``, ``sigma = (2a+i-1) i / 2``;
    the ``i = 0`` coefficient is 1.
    """
    if i < 0 or i > l:
        raise IndexOutOfRange(f"alpha^({l})_{i} needs 0 <= i <= l")
    fld = CyclotomicField(order)
    if i == 0:
        return fld.one()
    sigma = (2 * a + i - 1) * i // 2
    val = fld.q_power(sigma) * q_number(l - i + 1, i - 1, order)
    return -val if i % 2 else val

