"""L-polynomials of the k-th differential and machine checks of ``d^N f = 0``.

L-polynomials are built in ``raw`` mode, where no relation between differentials
holds, and only afterwards reduced with the cyclic relations.  So the check that
the relations kill every condition is a genuine reduction.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement, permutations, product
from math import factorial

from .forms import Form, FormSpace, exterior_d, monomial_str
from .report import Report, parallel_map
from .symfun import CoeffPoly, random_poly

__all__ = [
    "BadIndexCount",
    "l_poly",
    "dk_expand",
    "reduce_form",
    "verify_dN_zero",
    "verify_l_conditions",
    "index_label",
]


class BadIndexCount(ValueError):
    pass


def index_label(indices) -> str:
    return "".join(f"x{i + 1}" for i in indices)


@lru_cache(maxsize=None)
def _l_ordered(N: int, n: int, k: int, indices: tuple) -> Form:
    space = FormSpace(N, n, "raw")
    m = len(indices)
    if m > k or m == 0:
        return space.zero()
    if m == 1:
        return space.d(k, indices[0]) if k < N else space.zero()
    if m == k:
        return space.monomial(tuple((1, i) for i in indices))
    acc = exterior_d(_l_sym(N, n, k - 1, indices))
    w = Fraction(1, m)
    for l in range(m):
        rest = indices[:l] + indices[l + 1:]
        acc = acc + (space.d(1, indices[l]) * _l_sym(N, n, k - 1, rest)).scale(w)
    return acc


@lru_cache(maxsize=None)
def _l_sym(N: int, n: int, k: int, indices: tuple) -> Form:
    space = FormSpace(N, n, "raw")
    m = len(indices)
    acc = space.zero()
    for perm in permutations(indices):
        acc = acc + _l_ordered(N, n, k, perm)
    return acc.scale(Fraction(1, factorial(m)))


def l_poly(k: int, indices, N: int = 3, n: int | None = None) -> Form:
    """``L^{indices}_{(k)}`` as a raw-mode form, symmetric in ``indices`` (0-based)."""
    indices = tuple(indices)
    if not 1 <= len(indices) <= k:
        raise BadIndexCount(f"{len(indices)} indices for step {k}")
    if n is None:
        n = max(indices) + 1
    if any(not 0 <= i < n for i in indices):
        raise BadIndexCount(f"indices {indices} outside a {n}-chart")
    return _l_sym(N, n, k, indices)


def _multi_partial(f: CoeffPoly, indices) -> CoeffPoly:
    for i in indices:
        f = f.partial(i)
        if not f:
            break
    return f


def dk_expand(f: CoeffPoly, k: int, N: int = 3) -> Form:
    """``sum over index tuples of (partial derivatives of f) * L^{I}_{(k)}`` in raw mode."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = f.nvars
    space = FormSpace(N, n, "raw")
    acc = space.zero()
    for m in range(1, k + 1):
        for idx in product(range(n), repeat=m):
            c = _multi_partial(f, idx)
            if c:
                acc = acc + _l_sym(N, n, k, idx).scale(c)
    return acc


def reduce_form(form: Form, mode: str = "truncated") -> Form:
    """Re-read a form under another mode's relations."""
    space = FormSpace(form.N, form.space.n, mode)
    return Form.from_words(space, form.terms.items())


def _dN_trial(N: int, n: int, degree: int, seed: int, t: int):
    f = random_poly(seed * 1000 + t, n, degree, order=N)
    space = FormSpace(N, n, "truncated")
    g = space.function(f)
    for _ in range(N):
        g = exterior_d(g)
    return f, g


def verify_dN_zero(N: int, n: int, trials: int = 20, seed: int = 0, degree: int = 4) -> Report:
    """Apply ``d`` N times to seeded random polynomials in the truncated algebra."""
    if N not in (3, 4):
        raise ValueError("nilpotency suites cover N = 3 and N = 4")
    rep = Report("verify nilpotency",
                 {"N": N, "n": n, "trials": trials, "seed": seed, "degree": degree})
    results = parallel_map(lambda t: _dN_trial(N, n, degree, seed, t), range(trials))
    for t, (f, g) in enumerate(results):
        rep.add(f"trial {t}: d^{N}({f})", g.is_zero(), str(g), N=N, n=n)
    return rep


def verify_l_conditions(N: int, n: int) -> Report:
    """Reduce every condition ``L^{I}_{(N)}`` with the cyclic relations; each must vanish."""
    if N < 2:
        raise ValueError("N must be >= 2")
    rep = Report("verify conditions", {"N": N, "n": n})
    for m in range(N, 0, -1):
        for idx in combinations_with_replacement(range(n), m):
            raw = _l_sym(N, n, N, idx)
            reduced = reduce_form(raw, "truncated")
            name = f"L^{{{index_label(idx)}}}_({N})"
            witness = None
            if reduced:
                witness = " + ".join(f"({c}) {monomial_str(w)}"
                                     for w, c in reduced.sorted_terms())
            rep.add(name, reduced.is_zero(), witness, N=N, n=n,
                    raw_terms=len(raw.terms))
    return rep
