"""Z_N-graded left module of differential forms with higher-order differentials.

A monomial is a tuple of letters ``(alpha, i)`` standing for ``d^alpha x^i``
(``1 <= alpha <= N-1``, ``i`` a 0-based coordinate index).  A :class:`Form` maps
normal-form monomials to polynomial coefficients written on the left.

Three algebra modes are supported:

``truncated``
    order-N monomials obey the r-cyclic relation
    ``L1 L2 ... Lr = q^alpha1 L2 ... Lr L1``; monomials of order > N vanish.
``free``
    the one-dimensional N = 3 calculus where powers of ``d^2 t`` survive:
    ``d^2t dt = q^2 dt d^2t`` and ``(dt)^3 = 0``.  Functions commute with
    ``dt`` but not with ``d^2t``: applying ``d`` to ``f dt = dt f`` forces
    ``d^2t f = f d^2t + (1 - q) f' (dt)^2``, and products use that rule.
``raw``
    no relations at all (words are kept verbatim); used to build the
    L-polynomials before any relation is imposed.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

from .scalar import CycScalar, CyclotomicField
from .symfun import CoeffPoly, MismatchedArity

__all__ = [
    "FormSpace",
    "Form",
    "BadOrder",
    "NonCommutativeCoefficient",
    "UnsupportedMode",
    "UnsupportedN",
    "normal_form",
    "form_mul",
    "exterior_d",
    "basis_enumerate",
    "module_dimension",
    "monomial_order",
    "monomial_grade",
    "monomial_str",
    "parse_monomial",
]

MODES = ("truncated", "free", "raw")


class BadOrder(ValueError):
    pass


class NonCommutativeCoefficient(ValueError):
    pass


class UnsupportedMode(ValueError):
    pass


class UnsupportedN(ValueError):
    pass


@dataclass(frozen=True)
class FormSpace:
    N: int
    n: int
    mode: str = "truncated"

    def __post_init__(self):
        if self.mode not in MODES:
            raise UnsupportedMode(f"unknown mode {self.mode!r}")
        if self.N < 2 or self.n < 1:
            raise ValueError(f"bad form space N={self.N}, n={self.n}")
        if self.mode == "free" and (self.N != 3 or self.n != 1):
            raise UnsupportedMode("free mode is the one-dimensional N = 3 calculus")

    @property
    def field(self) -> CyclotomicField:
        return CyclotomicField(self.N)

    def zero(self) -> Form:
        return Form(self, {})

    def one(self) -> Form:
        return self.function(CoeffPoly.constant(self.field, self.n, 1))

    def function(self, f: CoeffPoly) -> Form:
        if f.nvars != self.n:
            raise MismatchedArity(f"function of {f.nvars} variables on an {self.n}-chart")
        return Form(self, {(): f} if f else {})

    def coordinate(self, i: int) -> Form:
        return self.function(CoeffPoly.variable(self.field, self.n, i))

    def d(self, alpha: int, i: int) -> Form:
        """The generator ``d^alpha x^i`` (zero when ``alpha >= N``)."""
        if alpha >= self.N:
            return self.zero()
        return self.monomial(((alpha, i),))

    def monomial(self, word, coeff=None) -> Form:
        word = tuple(word)
        one = CoeffPoly.constant(self.field, self.n, 1)
        c = one if coeff is None else _as_poly(self, coeff)
        return Form.from_words(self, [(word, c)])


def _as_poly(space: FormSpace, c) -> CoeffPoly:
    if isinstance(c, CoeffPoly):
        return c
    return CoeffPoly.constant(space.field, space.n, c)


def monomial_order(word) -> int:
    return sum(a for a, _ in word)


def monomial_grade(word, N: int) -> int:
    return monomial_order(word) % N


def monomial_str(word) -> str:
    if not word:
        return "1"
    return "*".join(f"dx{i + 1}" if a == 1 else f"d{a}x{i + 1}" for a, i in word)


def parse_monomial(text: str):
    text = text.strip()
    if text == "1":
        return ()
    word = []
    for piece in text.split("*"):
        piece = piece.strip()
        if piece.startswith("dx"):
            word.append((1, int(piece[2:]) - 1))
        elif piece.startswith("d") and "x" in piece:
            a, i = piece[1:].split("x")
            word.append((int(a), int(i) - 1))
        else:
            raise ValueError(f"bad monomial factor {piece!r}")
    return tuple(word)


@lru_cache(maxsize=200_000)
def _normal_form(word, N: int, mode: str):
    """Return ``(q-exponent, monomial)`` or ``None`` for zero."""
    for a, _ in word:
        if not 1 <= a <= N - 1:
            raise BadOrder(f"differential order {a} outside 1..{N - 1}")
    if mode == "raw":
        return 0, word
    if mode == "free":
        ones = twos = inversions = 0
        for a, _ in word:
            if a == 1:
                ones += 1
                inversions += twos
            else:
                twos += 1
        if ones >= 3:
            return None
        # each d2t dt -> q^2 dt d2t
        return (2 * inversions) % N, ((1, 0),) * ones + ((2, 0),) * twos
    order = monomial_order(word)
    if order < N:
        return 0, word
    if order > N:
        return None
    r = len(word)
    best = word
    best_phase = 0
    phase = 0
    for j in range(1, r):
        phase += word[j - 1][0]
        rot = word[j:] + word[:j]
        if rot == word:
            # periodic word equals a nontrivial phase times itself
            if phase % N:
                return None
            break
        if rot < best:
            best, best_phase = rot, phase
    return best_phase % N, best


def normal_form(word, space: FormSpace):
    """Reduce a raw word; return ``(coefficient, monomial)`` or ``None`` for zero."""
    res = _normal_form(tuple(word), space.N, space.mode)
    if res is None:
        return None
    k, mono = res
    return space.field.q_power(k), mono


class Form:
    """Immutable element of the left module ``Omega(U)``."""

    __slots__ = ("space", "terms")

    def __init__(self, space: FormSpace, terms):
        self.space = space
        self.terms = {m: c for m, c in terms.items() if c}

    @classmethod
    def from_words(cls, space: FormSpace, pairs) -> Form:
        """Build from ``(raw word, coefficient poly)`` pairs, normalizing each word."""
        acc: dict = {}
        for word, c in pairs:
            if not c:
                continue
            res = _normal_form(tuple(word), space.N, space.mode)
            if res is None:
                continue
            k, mono = res
            if k:
                c = c * space.field.q_power(k)
            prev = acc.get(mono)
            acc[mono] = c if prev is None else prev + c
        return cls(space, acc)

    # -- queries ------------------------------------------------------
    @property
    def N(self) -> int:
        return self.space.N

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def grades(self) -> set[int]:
        return {monomial_grade(m, self.N) for m in self.terms}

    def grade(self) -> int:
        """Grade of a homogeneous form (zero counts as grade 0)."""
        g = self.grades()
        if len(g) > 1:
            raise ValueError("form is not grade-homogeneous")
        return g.pop() if g else 0

    def homogeneous_parts(self) -> dict[int, Form]:
        parts: dict[int, dict] = {}
        for m, c in self.terms.items():
            parts.setdefault(monomial_grade(m, self.N), {})[m] = c
        return {g: Form(self.space, t) for g, t in parts.items()}

    def coefficient(self, word) -> CoeffPoly:
        return self.terms.get(tuple(word), CoeffPoly.zero(self.space.field, self.space.n))

    def __eq__(self, other):
        if isinstance(other, Form):
            return self.space == other.space and self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    __hash__ = None

    # -- linear structure ---------------------------------------------
    def _check(self, other: Form):
        if self.space != other.space:
            raise MismatchedArity(f"forms live in {self.space} and {other.space}")

    def __add__(self, other):
        if not isinstance(other, Form):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            prev = out.get(m)
            out[m] = c if prev is None else prev + c
        return Form(self.space, out)

    def __neg__(self):
        return Form(self.space, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Form):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> Form:
        """Left multiplication by a scalar or a function."""
        if isinstance(c, CoeffPoly):
            return Form(self.space, {m: c * v for m, v in self.terms.items()})
        return Form(self.space, {m: v.scale(c) for m, v in self.terms.items()})

    def __rmul__(self, c):
        if isinstance(c, (int, Fraction, CycScalar, CoeffPoly)):
            return self.scale(c)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Form):
            return form_mul(self, other)
        if isinstance(other, (int, Fraction, CycScalar)):
            return self.scale(other)
        return NotImplemented

    # -- text ---------------------------------------------------------
    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: (monomial_order(t[0]), t[0]))

    def to_string(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"({c}) ⊗ {monomial_str(m)}" for m, c in self.sorted_terms())

    def __str__(self) -> str:
        return self.to_string()

    def __repr__(self) -> str:
        return f"Form(N={self.N}, n={self.space.n}, {self.space.mode}: {self})"


def _has_higher(word) -> bool:
    return any(a > 1 for a, _ in word)


def form_mul(a: Form, b: Form) -> Form:
    """Product in the left module.

    A coefficient of ``b`` moves left past the monomial of ``a``.  In free mode
    it crosses ``d^2t`` with the commutation rule; elsewhere that is only
    allowed when the coefficient is constant or the monomial holds
    first-order differentials only.
    """
    a._check(b)
    space = a.space
    pairs = []
    for m1, f1 in a.terms.items():
        higher = _has_higher(m1)
        for m2, f2 in b.terms.items():
            if not higher or f2.is_constant():
                pairs.append((m1 + m2, f1 * f2))
            elif space.mode == "free":
                for g, w in _pass_left_free(m1, f2, space.field):
                    pairs.append((w + m2, f1 * g))
            else:
                raise NonCommutativeCoefficient(
                    f"function {f2} cannot cross {monomial_str(m1)}"
                )
    return Form.from_words(space, pairs)


def _pass_left_free(word, g: CoeffPoly, fld: CyclotomicField):
    """Rewrite ``word * g`` as ``sum g_k * word_k`` in the one-variable calculus."""
    one_minus_q = fld.one() - fld.q
    out = [(g, ())]
    for letter in reversed(word):
        nxt = []
        for c, suffix in out:
            nxt.append((c, (letter,) + suffix))
            if letter[0] == 2:
                dc = c.partial(0)
                if dc:
                    nxt.append((dc.scale(one_minus_q), ((1, 0), (1, 0)) + suffix))
        out = nxt
    return out


def _d_word(word, N: int):
    """q-Leibniz expansion of d on a word: list of ``(q-exponent, word)``."""
    out = []
    prefix = 0
    for j, (a, i) in enumerate(word):
        if a + 1 < N:
            out.append((prefix % N, word[:j] + ((a + 1, i),) + word[j + 1:]))
        prefix += a
    return out


def exterior_d(form: Form) -> Form:
    """The q-differential: ``d(f M) = df M + f dM`` with ``d^N x = 0``."""
    space = form.space
    fld = space.field
    pairs = []
    for word, f in form.terms.items():
        for i in range(space.n):
            df = f.partial(i)
            if df:
                pairs.append((((1, i),) + word, df))
        for k, w in _d_word(word, space.N):
            pairs.append((w, f * fld.q_power(k) if k else f))
    return Form.from_words(space, pairs)


def iterate_d(form: Form, times: int) -> Form:
    for _ in range(times):
        form = exterior_d(form)
    return form


def basis_enumerate(n: int, N: int = 3):
    """All independent normal-form monomials of order 1..3 in the truncated N = 3 module."""
    if N != 3:
        raise UnsupportedN("the module basis count is specific to N = 3")
    seen = set()
    letters = [(a, i) for a in (1, 2) for i in range(n)]
    for length in (1, 2, 3):
        for word in product(letters, repeat=length):
            if monomial_order(word) > N:
                continue
            res = _normal_form(word, N, "truncated")
            if res is not None:
                seen.add(res[1])
    return sorted(seen, key=lambda m: (monomial_order(m), m))


def module_dimension(n: int, N: int = 3) -> int:
    """``(n^3 + 6 n^2 + 5 n) / 3``."""
    if N != 3:
        raise UnsupportedN("the dimension formula is specific to N = 3")
    num = n ** 3 + 6 * n ** 2 + 5 * n
    assert num % 3 == 0
    return num // 3
