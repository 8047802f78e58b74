"""Generalized Clifford algebras ``C_{p,N}`` and their q-exterior calculus.

Elements are stored exactly on normal-ordered monomials
``G_1^a_1 ... G_p^a_p`` (``0 <= a_k < N``).  Generators are 0-based in the API
and printed 1-based.  Matrices give a second, independent evaluation path.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement, permutations, product
from math import factorial, prod
from typing import Sequence

from .report import Report, parallel_map
from .scalar import CycScalar, CyclotomicField, IndexOutOfRange, alpha_coeff

__all__ = [
    "CliffordElement",
    "CliffordMatrixRep",
    "CliffordConnection",
    "ArityMismatch",
    "NotLeftMultiplication",
    "NotHomogeneous",
    "basis",
    "normal_order",
    "matrix_rep",
    "n_anticommutator",
    "q_exterior_d",
    "q_commutator",
    "operator_anticommutator",
    "verify_nilpotency_and_anticommutators",
    "curvature",
    "displayed_curvature",
    "displayed_block",
    "arrangement_sum",
    "multiplicity_factor",
    "d_power_by_alpha",
    "sigma_matrices",
    "random_connection",
    "bianchi_check",
]


class ArityMismatch(ValueError):
    pass


class NotLeftMultiplication(ArithmeticError):
    pass


class NotHomogeneous(ValueError):
    pass


def _monomial_phase(a: tuple, b: tuple) -> int:
    """q-exponent of ``G^a G^b = q^e G^(a+b)``: each G_i (from a) passes each G_j (from b), j < i."""
    e = 0
    for i in range(1, len(a)):
        if a[i]:
            e -= a[i] * sum(b[:i])
    return e


class CliffordElement:
    __slots__ = ("p", "N", "field", "terms")

    def __init__(self, p: int, N: int, terms=None):
        self.p = p
        self.N = N
        self.field = CyclotomicField(N)
        self.terms = {}
        for e, c in (terms or {}).items():
            if len(e) != p:
                raise IndexOutOfRange(f"exponent {e} for {p} generators")
            c = self.field.coerce(c)
            if c:
                key = tuple(x % N for x in e)
                prev = self.terms.get(key)
                s = c if prev is None else prev + c
                if s:
                    self.terms[key] = s
                else:
                    self.terms.pop(key, None)

    @classmethod
    def _raw(cls, p, N, terms):
        obj = cls.__new__(cls)
        obj.p, obj.N, obj.field, obj.terms = p, N, CyclotomicField(N), terms
        return obj

    @classmethod
    def zero(cls, p: int, N: int) -> CliffordElement:
        return cls(p, N)

    @classmethod
    def one(cls, p: int, N: int) -> CliffordElement:
        return cls(p, N, {(0,) * p: 1})

    @classmethod
    def scalar(cls, p: int, N: int, c) -> CliffordElement:
        return cls(p, N, {(0,) * p: c})

    @classmethod
    def generator(cls, p: int, N: int, k: int, power: int = 1) -> CliffordElement:
        if not 0 <= k < p:
            raise IndexOutOfRange(f"generator {k} outside 0..{p - 1}")
        e = [0] * p
        e[k] = power
        return cls(p, N, {tuple(e): 1})

    @classmethod
    def monomial(cls, p: int, N: int, exps, coeff=1) -> CliffordElement:
        return cls(p, N, {tuple(exps): coeff})

    # -- queries ------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def grades(self) -> set[int]:
        return {sum(e) % self.N for e in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.grades()) <= 1

    def grade(self) -> int:
        g = self.grades()
        if len(g) > 1:
            raise NotHomogeneous(f"element mixes grades {sorted(g)}")
        return g.pop() if g else 0

    def homogeneous_parts(self) -> dict[int, CliffordElement]:
        parts: dict[int, dict] = {}
        for e, c in self.terms.items():
            parts.setdefault(sum(e) % self.N, {})[e] = c
        return {g: CliffordElement._raw(self.p, self.N, t) for g, t in parts.items()}

    def __eq__(self, other):
        if isinstance(other, CliffordElement):
            return self.p == other.p and self.N == other.N and self.terms == other.terms
        if isinstance(other, int) and other == 0:
            return not self.terms
        return NotImplemented

    __hash__ = None

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: CliffordElement):
        if (self.p, self.N) != (other.p, other.N):
            raise ArityMismatch(f"C_{{{self.p},{self.N}}} vs C_{{{other.p},{other.N}}}")

    def __add__(self, other):
        if not isinstance(other, CliffordElement):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            prev = out.get(e)
            if prev is None:
                out[e] = c
            else:
                s = prev + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return CliffordElement._raw(self.p, self.N, out)

    def __neg__(self):
        return CliffordElement._raw(self.p, self.N, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> CliffordElement:
        s = self.field.coerce(s)
        if not s:
            return CliffordElement.zero(self.p, self.N)
        return CliffordElement._raw(self.p, self.N, {e: c * s for e, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, CliffordElement):
            self._check(other)
            N = self.N
            fld = self.field
            out: dict = {}
            for a, ca in self.terms.items():
                for b, cb in other.terms.items():
                    e = tuple((x + y) % N for x, y in zip(a, b))
                    c = ca * cb * fld.q_power(_monomial_phase(a, b))
                    prev = out.get(e)
                    out[e] = c if prev is None else prev + c
            return CliffordElement(self.p, self.N, out)
        if isinstance(other, (int, CycScalar)) or hasattr(other, "denominator"):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, CycScalar)) or hasattr(other, "denominator"):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k: int) -> CliffordElement:
        out = CliffordElement.one(self.p, self.N)
        for _ in range(k):
            out = out * self
        return out

    # -- text ---------------------------------------------------------
    def sorted_terms(self):
        return sorted(self.terms.items())

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                f"G{k + 1}" if a == 1 else f"G{k + 1}^{a}" for k, a in enumerate(e) if a
            )
            pieces.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(pieces)

    def __repr__(self) -> str:
        return f"CliffordElement(p={self.p}, N={self.N}, {self})"

    def to_matrix(self, rep: CliffordMatrixRep):
        size = rep.size
        acc = _zeros(self.field, size)
        for e, c in self.terms.items():
            m = _identity(self.field, size)
            for k, a in enumerate(e):
                for _ in range(a):
                    m = _matmul(m, rep.matrices[k])
            acc = _matadd(acc, _matscale(m, c))
        return acc


def basis(p: int, N: int) -> list[CliffordElement]:
    return [CliffordElement.monomial(p, N, e) for e in product(range(N), repeat=p)]


def normal_order(word, p: int, N: int) -> CliffordElement:
    """Normal-order a product given as generator indices or ``(index, power)`` pairs."""
    out = CliffordElement.one(p, N)
    for item in word:
        if isinstance(item, CliffordElement):
            out = out * item
            continue
        k, power = item if isinstance(item, tuple) else (item, 1)
        out = out * CliffordElement.generator(p, N, k, power)
    return out


# -- exact matrices -----------------------------------------------------------


def _zeros(fld, n):
    z = fld.zero()
    return [[z] * n for _ in range(n)]


def _identity(fld, n):
    m = _zeros(fld, n)
    for i in range(n):
        m[i][i] = fld.one()
    return m


def _matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            s = None
            for t in range(k):
                x, y = a[i][t], b[t][j]
                if x and y:
                    s = x * y if s is None else s + x * y
            row.append(s if s is not None else a[0][0] * 0)
        out.append(row)
    return out


def _matadd(a, b):
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _matscale(a, c):
    return [[x * c for x in row] for row in a]


def _kron(a, b):
    out = []
    for ra in a:
        for rb in b:
            out.append([x * y for x in ra for y in rb])
    return out


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = _kron(out, m)
    return out


def _mateq(a, b) -> bool:
    return all(x == y for ra, rb in zip(a, b) for x, y in zip(ra, rb))


@dataclass(frozen=True)
class CliffordMatrixRep:
    p: int
    N: int
    matrices: tuple

    @property
    def size(self) -> int:
        return len(self.matrices[0])

    @property
    def field(self) -> CyclotomicField:
        return CyclotomicField(self.N)

    def relation_failures(self) -> list[str]:
        fld = self.field
        bad = []
        eye = _identity(fld, self.size)
        for i, gi in enumerate(self.matrices):
            pw = eye
            for _ in range(self.N):
                pw = _matmul(pw, gi)
            if not _mateq(pw, eye):
                bad.append(f"G{i + 1}^{self.N} != 1")
            for j in range(i + 1, self.p):
                gj = self.matrices[j]
                lhs = _matmul(gi, gj)
                rhs = _matscale(_matmul(gj, gi), fld.q)
                if not _mateq(lhs, rhs):
                    bad.append(f"G{i + 1}G{j + 1} != q G{j + 1}G{i + 1}")
        return bad


def sigma_matrices(N: int):
    """Shift ``s1``, clock ``s3`` and ``s2 = c s3 s1`` with ``c = sqrt(q)`` for even N, 1 for odd N."""
    fld = CyclotomicField(N)
    s1 = _zeros(fld, N)
    s3 = _zeros(fld, N)
    for i in range(N):
        s1[i][(i + 1) % N] = fld.one()
        s3[i][i] = fld.q_power(i)
    c = fld.sqrt_q() if N % 2 == 0 else fld.one()
    s2 = _matscale(_matmul(s3, s1), c)
    return s1, s2, s3


def matrix_rep(p: int, N: int) -> CliffordMatrixRep:
    """Tensor-product representation on ``N^k x N^k`` matrices, ``k = floor(p/2)`` (``k = 1`` for ``p = 1``)."""
    if p < 1 or N < 2:
        raise ValueError(f"need p >= 1 and N >= 2, got p={p}, N={N}")
    fld = CyclotomicField(N)
    s1, s2, s3 = sigma_matrices(N)
    eye = _identity(fld, N)
    if p == 1:
        mats = (s1,)
    else:
        k = p // 2
        mats = []
        for l in range(1, k + 1):
            left = [s3] * (l - 1)
            right = [eye] * (k - l)
            mats.append(_kron_all(left + [s1] + right))
            mats.append(_kron_all(left + [s2] + right))
        if p % 2:
            mats.append(_kron_all([s3] * k))
        mats = tuple(mats)
    rep = CliffordMatrixRep(p, N, mats)
    bad = rep.relation_failures()
    if bad:
        raise ArithmeticError(f"representation violates relations: {bad}")
    return rep


# -- q-exterior calculus ------------------------------------------------------


def n_anticommutator(elements: Sequence[CliffordElement]) -> CliffordElement:
    """Sum of the product over all ``N!`` orderings of the arguments."""
    elements = list(elements)
    if not elements:
        raise ArityMismatch("empty anticommutator")
    p, N = elements[0].p, elements[0].N
    if len(elements) != N:
        raise ArityMismatch(f"C_{{{p},{N}}} anticommutator takes {N} arguments, got {len(elements)}")
    acc = CliffordElement.zero(p, N)
    for perm in permutations(elements):
        term = perm[0]
        for x in perm[1:]:
            term = term * x
        acc = acc + term
    return acc


def q_commutator(b: CliffordElement, c: CliffordElement) -> CliffordElement:
    """``[B, C]_q = B C - q^(b c) C B`` extended bilinearly over homogeneous parts."""
    acc = CliffordElement.zero(b.p, b.N)
    for gb, pb in b.homogeneous_parts().items():
        for gc, pc in c.homogeneous_parts().items():
            acc = acc + pb * pc - (pc * pb).scale(b.field.q_power(gb * gc))
    return acc


def q_exterior_d(k: int, B: CliffordElement) -> CliffordElement:
    """``d_k B = G_k B - q^b B G_k`` on each homogeneous part of grade ``b``."""
    g = CliffordElement.generator(B.p, B.N, k)
    acc = CliffordElement.zero(B.p, B.N)
    for b, part in B.homogeneous_parts().items():
        acc = acc + g * part - (part * g).scale(B.field.q_power(b))
    return acc


def operator_anticommutator(ops, B: CliffordElement) -> CliffordElement:
    """Apply the sum over all orderings of the composed operators ``ops`` to ``B``."""
    acc = CliffordElement.zero(B.p, B.N)
    for perm in permutations(ops):
        x = B
        for op in reversed(perm):
            x = op(x)
        acc = acc + x
    return acc


def d_power_by_alpha(k: int, l: int, B: CliffordElement) -> CliffordElement:
    """``d_k^l B`` from the closed expansion ``sum_i alpha^(l)_i G_k^(l-i) B G_k^i``."""
    acc = CliffordElement.zero(B.p, B.N)
    for a, part in B.homogeneous_parts().items():
        for i in range(l + 1):
            left = CliffordElement.generator(B.p, B.N, k, l - i)
            right = CliffordElement.generator(B.p, B.N, k, i)
            acc = acc + (left * part * right).scale(alpha_coeff(l, i, a, B.N))
    return acc


def _d_op(k):
    return lambda x: q_exterior_d(k, x)


def _generator_word_checks(rep, p, N, max_len, report):
    fld = CyclotomicField(N)
    bad = []
    for length in range(1, max_len + 1):
        for word in product(range(p), repeat=length):
            el = normal_order(word, p, N)
            m = _identity(fld, rep.size)
            for k in word:
                m = _matmul(m, rep.matrices[k])
            if not _mateq(el.to_matrix(rep), m):
                bad.append("".join(f"G{k + 1}" for k in word))
    report.add(f"normal order agrees with matrices on words up to length {max_len}",
               not bad, ", ".join(bad[:5]))


def verify_nilpotency_and_anticommutators(p: int, N: int, word_length: int = 4) -> Report:
    rep_ = Report("clifford verify", {"p": p, "N": N})
    rep = matrix_rep(p, N)
    fld = CyclotomicField(N)
    rep_.add("matrix relations G_iG_j = q_ij G_jG_i and G^N = 1",
             not rep.relation_failures(), "; ".join(rep.relation_failures()))
    _generator_word_checks(rep, p, N, word_length, rep_)

    gens = [CliffordElement.generator(p, N, k) for k in range(p)]
    gen_mats = rep.matrices
    bad_alg, bad_mat = [], []
    for idx in product(range(p), repeat=N):
        delta = 1 if len(set(idx)) == 1 else 0
        want = CliffordElement.scalar(p, N, factorial(N) * delta)
        if n_anticommutator([gens[i] for i in idx]) != want:
            bad_alg.append(idx)
        macc = _zeros(fld, rep.size)
        for perm in permutations(idx):
            m = _identity(fld, rep.size)
            for i in perm:
                m = _matmul(m, gen_mats[i])
            macc = _matadd(macc, m)
        if not _mateq(macc, _matscale(_identity(fld, rep.size), fld.rational(factorial(N) * delta))):
            bad_mat.append(idx)
    rep_.add("generalized Kronecker relation on generator N-tuples (algebra)", not bad_alg,
             str(bad_alg[:5]))
    rep_.add("generalized Kronecker relation on generator N-tuples (matrices)", not bad_mat,
             str(bad_mat[:5]))

    full = basis(p, N)
    for k in range(p):
        bad = []
        grade_bad = []
        for B in full:
            x = B
            for _ in range(N):
                prev_grade = x.grade()
                x = q_exterior_d(k, x)
                if x and x.grade() != (prev_grade + 1) % N:
                    grade_bad.append(str(B))
            if x:
                bad.append(str(B))
        rep_.add(f"d_{k + 1}^{N} = 0 on the basis", not bad, ", ".join(bad[:5]))
        rep_.add(f"d_{k + 1} raises the grade by one", not grade_bad, ", ".join(grade_bad[:5]))

    def sweep(idx):
        ops = [_d_op(i) for i in idx]
        return idx, [str(B) for B in full if operator_anticommutator(ops, B)]

    for idx, bad in parallel_map(sweep, list(combinations_with_replacement(range(p), N))):
        label = "".join(str(i + 1) for i in idx)
        rep_.add(f"operator anticommutator {{d}}_{label} = 0 on the basis", not bad,
                 ", ".join(bad[:5]))

    bad = []
    for k in range(p):
        for B in full:
            x = B
            for l in range(1, N + 1):
                x = q_exterior_d(k, x)
                if d_power_by_alpha(k, l, B) != x:
                    bad.append(f"d_{k + 1}^{l}({B})")
    rep_.add("alpha-coefficient expansion matches iterated d_k", not bad, ", ".join(bad[:5]))
    return rep_


# -- connections and curvature -----------------------------------------------


@dataclass(frozen=True)
class CliffordConnection:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("empty connection")
        p, N = comps[0].p, comps[0].N
        if len(comps) != p:
            raise ArityMismatch(f"C_{{{p},{N}}} connection needs {p} components")
        for k, a in enumerate(comps):
            if (a.p, a.N) != (p, N):
                raise ArityMismatch("components live in different algebras")
            if a and a.grades() != {1 % N}:
                raise NotHomogeneous(f"A_{k + 1} is not of grade 1")

    @property
    def p(self) -> int:
        return self.components[0].p

    @property
    def N(self) -> int:
        return self.components[0].N

    @classmethod
    def zero(cls, p: int, N: int) -> CliffordConnection:
        return cls(tuple(CliffordElement.zero(p, N) for _ in range(p)))

    def covariant(self, k: int):
        a = self.components[k]
        return lambda x: q_exterior_d(k, x) + a * x


def random_connection(p: int, N: int, seed: int, height: int = 3) -> CliffordConnection:
    """Grade-1 components with seeded coefficients ``a + b q`` (small rationals)."""
    rng = random.Random(seed)
    fld = CyclotomicField(N)
    grade_one = [e for e in product(range(N), repeat=p) if sum(e) % N == 1 % N]
    comps = []
    for _ in range(p):
        terms = {}
        for e in grade_one:
            c = fld.rational(rng.randint(-height, height)) + fld.q * rng.randint(-height, height)
            terms[e] = c
        comps.append(CliffordElement(p, N, terms))
    return CliffordConnection(tuple(comps))


def _check_index(A: CliffordConnection, index) -> tuple:
    index = tuple(index)
    if len(index) != A.N:
        raise ArityMismatch(f"curvature index needs {A.N} entries")
    if any(not 0 <= i < A.p for i in index):
        raise IndexOutOfRange(f"index {index} outside 0..{A.p - 1}")
    return tuple(sorted(index))


def _curvature_direct(A: CliffordConnection, index) -> CliffordElement:
    ops = [A.covariant(i) for i in index]
    omega = operator_anticommutator(ops, CliffordElement.one(A.p, A.N))
    for B in basis(A.p, A.N):
        if operator_anticommutator(ops, B) != omega * B:
            raise NotLeftMultiplication(f"operator is not left multiplication on {B}")
    return omega


def _curvature_formula(A: CliffordConnection, index) -> CliffordElement:
    # replace every non-empty set of positions by connection components
    p, N = A.p, A.N
    gens = [CliffordElement.generator(p, N, i) for i in index]
    comps = [A.components[i] for i in index]
    acc = CliffordElement.zero(p, N)
    for r in range(1, N + 1):
        for subset in combinations(range(N), r):
            args = [comps[s] if s in subset else gens[s] for s in range(N)]
            acc = acc + n_anticommutator(args)
    return acc


def curvature(A: CliffordConnection, index, method: str = "direct") -> CliffordElement:
    """``Omega`` with ``{D_i1, ..., D_iN}(B) = Omega B``, the braces summing all ``N!`` orderings."""
    index = _check_index(A, index)
    if method == "direct":
        omega = _curvature_direct(A, index)
    elif method == "formula":
        omega = _curvature_formula(A, index)
    else:
        raise ValueError(f"unknown method {method!r}")
    if omega and omega.grades() != {0}:
        raise ArithmeticError("curvature is not of grade 0")
    return omega


def multiplicity_factor(index) -> int:
    counts: dict[int, int] = {}
    for i in index:
        counts[i] = counts.get(i, 0) + 1
    return prod(factorial(c) for c in counts.values())


def displayed_curvature(A: CliffordConnection, index, method: str = "direct") -> CliffordElement:
    """Curvature with repeated operators counted once per distinct arrangement."""
    omega = curvature(A, index, method)
    return omega.scale(CyclotomicField(A.N).rational(1) / multiplicity_factor(index))


def arrangement_sum(labels: Sequence[str], values: dict) -> CliffordElement:
    """Sum of products over the distinct orderings of a label sequence."""
    acc = None
    for perm in sorted(set(permutations(labels))):
        term = values[perm[0]]
        for lab in perm[1:]:
            term = term * values[lab]
        acc = term if acc is None else acc + term
    return acc


def displayed_block(groups: Sequence[Sequence[str]], values: dict) -> CliffordElement:
    """Evaluate a printed curvature expression given as brace groups of labels.

    A group of several labels is a sum over its distinct arrangements; a group
    of one label is that element itself (for powers such as ``A1^3`` supply the
    power under its own label).
    """
    acc = None
    for group in groups:
        val = values[group[0]] if len(group) == 1 else arrangement_sum(group, values)
        acc = val if acc is None else acc + val
    return acc


def bianchi_check(A: CliffordConnection, index) -> Report:
    """``sum_s d_{i_s} Omega_{I\\s} = sum_s [Omega_{I\\s}, A_{i_s}]_q`` over all positions ``s``."""
    index = tuple(index)
    if len(index) != A.N + 1:
        raise ArityMismatch(f"Bianchi index needs {A.N + 1} entries")
    lhs = CliffordElement.zero(A.p, A.N)
    rhs = CliffordElement.zero(A.p, A.N)
    cache: dict[tuple, CliffordElement] = {}
    for s in range(len(index)):
        rest = tuple(sorted(index[:s] + index[s + 1:]))
        if rest not in cache:
            cache[rest] = curvature(A, rest, "formula")
        omega = cache[rest]
        lhs = lhs + q_exterior_d(index[s], omega)
        rhs = rhs + q_commutator(omega, A.components[index[s]])
    label = "".join(str(i + 1) for i in index)
    rep = Report("clifford bianchi", {"p": A.p, "N": A.N, "index": label})
    rep.add(f"Bianchi identity {label}", lhs == rhs, f"lhs - rhs = {lhs - rhs}")
    return rep
