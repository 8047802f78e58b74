"""Covariant second and third differentials in the Z_3-graded calculus.

Tensors are dicts keyed by 0-based index tuples ``(k, l, m)`` or
``(k, l, m, n)`` (upper index first) with polynomial values in the chart
coordinates.  ``q`` is the cube root of unity of ``Q(zeta_3)``; ``i sqrt(3)``
is represented exactly as ``q - q^2``.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .forms import Form, FormSpace, exterior_d, form_mul, monomial_str
from .report import Report
from .scalar import CyclotomicField
from .symfun import CoeffPoly, PolyMap, compose, random_poly

__all__ = [
    "ConnectionBundle",
    "TildeCoefficients",
    "GeodesicCoefficients",
    "BasisRewriteFailure",
    "NonSymmetricGamma",
    "NonFiniteState",
    "covariant_d2",
    "covariant_d3",
    "tilde_closed_form",
    "verify_d3_expansion",
    "z3_split",
    "contract_ddd",
    "transform_bundle",
    "tensor_transform",
    "verify_tensoriality",
    "torsion_and_reality",
    "riemann_tensor",
    "riemann_identification",
    "conjugate_constraint_holds",
    "random_bundle",
    "geodesic3_integrate",
    "richardson_ratio",
]

FIELD = CyclotomicField(3)
Q = FIELD.q
Q2 = FIELD.q_power(2)
THIRD = Fraction(1, 3)


class BasisRewriteFailure(ArithmeticError):
    pass


class NonSymmetricGamma(ValueError):
    pass


class NonFiniteState(ArithmeticError):
    pass


def _zero(n: int) -> CoeffPoly:
    return CoeffPoly.zero(FIELD, n)


def _full(n: int, rank: int, entries=None) -> dict:
    entries = entries or {}
    return {idx: entries.get(idx, _zero(n)) for idx in product(range(n), repeat=rank)}


@dataclass(frozen=True)
class ConnectionBundle:
    n: int
    gamma: dict
    bcoef: dict = field(default_factory=dict)
    ccoef: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "gamma", _full(self.n, 3, self.gamma))
        object.__setattr__(self, "bcoef", _full(self.n, 3, self.bcoef))
        object.__setattr__(self, "ccoef", _full(self.n, 4, self.ccoef))
        for t in (self.gamma, self.bcoef, self.ccoef):
            for v in t.values():
                if v.nvars != self.n:
                    raise ValueError(f"coefficient with {v.nvars} variables on an {self.n}-chart")

    def gamma_is_symmetric(self) -> bool:
        g = self.gamma
        return all(g[k, l, m] == g[k, m, l] for k, l, m in g)


@dataclass(frozen=True)
class TildeCoefficients:
    """``btilde`` in full; ``ctilde`` either in full (closed form) or its Z_3-anti part (extracted)."""

    btilde: dict
    ctilde: dict
    ctilde_is_anti: bool = False


def random_bundle(seed: int, n: int, degree: int = 1, symmetric: bool = False,
                  with_bc: bool = True) -> ConnectionBundle:
    rng = random.Random(seed)

    def rp():
        return random_poly(rng.randrange(1 << 30), n, degree, order=3, height=3)

    gamma = {}
    for k, l, m in product(range(n), repeat=3):
        if symmetric and m < l:
            continue
        gamma[k, l, m] = rp()
        if symmetric:
            gamma[k, m, l] = gamma[k, l, m]
    bcoef = {idx: rp() for idx in product(range(n), repeat=3)} if with_bc else {}
    ccoef = {idx: rp() for idx in product(range(n), repeat=4)} if with_bc else {}
    return ConnectionBundle(n, gamma, bcoef, ccoef)


# -- forms ------------------------------------------------------------------


def _space(n: int) -> FormSpace:
    return FormSpace(3, n, "truncated")


def covariant_d2(bundle: ConnectionBundle, k: int) -> Form:
    """``D^2 x^k = d^2 x^k + Gamma^k_lm dx^l dx^m``."""
    n = bundle.n
    sp = _space(n)
    acc = sp.d(2, k)
    for l, m in product(range(n), repeat=2):
        g = bundle.gamma[k, l, m]
        if g:
            acc = acc + sp.monomial(((1, l), (1, m)), g)
    return acc


def covariant_d3(bundle: ConnectionBundle, k: int):
    """``D^3 x^k = d(D^2 x^k) + B Dx D^2x + C Dx Dx Dx`` and its coefficients in the covariant basis.

    Returns ``(form, btilde_row, ctilde_anti_row)`` where the rows are keyed by
    ``(l, m)`` and ``(l, m, n)``.
    """
    n = bundle.n
    sp = _space(n)
    d2 = [covariant_d2(bundle, m) for m in range(n)]
    acc = exterior_d(d2[k])
    for l, m in product(range(n), repeat=2):
        b = bundle.bcoef[k, l, m]
        if b:
            acc = acc + form_mul(sp.d(1, l), d2[m]).scale(b)
    for l, m, r in product(range(n), repeat=3):
        c = bundle.ccoef[k, l, m, r]
        if c:
            acc = acc + sp.monomial(((1, l), (1, m), (1, r)), c)

    # B~ is read off the dx^l d2x^m monomials, the rest must be first order only
    btilde = {(l, m): acc.coefficient(((1, l), (2, m))) for l, m in product(range(n), repeat=2)}
    rest = acc
    for (l, m), b in btilde.items():
        if b:
            rest = rest - form_mul(sp.d(1, l), d2[m]).scale(b)
    stray = [w for w in rest.terms if any(a != 1 for a, _ in w) or len(w) != 3]
    if stray:
        raise BasisRewriteFailure(
            "terms outside the covariant basis: " + ", ".join(monomial_str(w) for w in stray))
    ctilde = {}
    for idx in product(range(n), repeat=3):
        res = sp_normal(sp, idx)
        if res is None:
            ctilde[idx] = _zero(n)
            continue
        phase, rep = res
        ctilde[idx] = rest.coefficient(rep).scale(THIRD / phase)
    return acc, btilde, ctilde


def sp_normal(space: FormSpace, idx):
    from .forms import normal_form

    return normal_form(tuple((1, i) for i in idx), space)


def tilde_closed_form(bundle: ConnectionBundle) -> TildeCoefficients:
    """``B~ = B + q^2 G_ml + q G_lm`` and ``C~ = C + d_l G_mn - G^r_lm G^k_rn - q G^r_mn G^k_lr``."""
    n = bundle.n
    g = bundle.gamma
    bt = {}
    for k, l, m in product(range(n), repeat=3):
        bt[k, l, m] = bundle.bcoef[k, l, m] + g[k, m, l].scale(Q2) + g[k, l, m].scale(Q)
    ct = {}
    for k, l, m, s in product(range(n), repeat=4):
        v = bundle.ccoef[k, l, m, s] + g[k, m, s].partial(l)
        for r in range(n):
            v = v - g[r, l, m] * g[k, r, s] - (g[r, m, s] * g[k, l, r]).scale(Q)
        ct[k, l, m, s] = v
    return TildeCoefficients(bt, ct)


def z3_split(t: dict):
    """Split a ``(k; l, m, n)`` tensor into parts of cyclic eigenvalue 1, q and q^2.

    The rotation is ``(rot T)_lmn = T_nlm``.
    """
    sym, conj, anti = {}, {}, {}
    for (k, l, m, s), v in t.items():
        a, b = t[k, s, l, m], t[k, m, s, l]
        sym[k, l, m, s] = (v + a + b).scale(THIRD)
        conj[k, l, m, s] = (v + a.scale(Q2) + b.scale(Q)).scale(THIRD)
        anti[k, l, m, s] = (v + a.scale(Q) + b.scale(Q2)).scale(THIRD)
    return sym, conj, anti


def contract_ddd(t: dict, k: int, n: int) -> Form:
    """``T^k_lmn dx^l dx^m dx^n`` in the truncated algebra."""
    sp = _space(n)
    acc = sp.zero()
    for l, m, s in product(range(n), repeat=3):
        v = t[k, l, m, s]
        if v:
            acc = acc + sp.monomial(((1, l), (1, m), (1, s)), v)
    return acc


def verify_d3_expansion(bundle: ConnectionBundle) -> Report:
    """Extract ``B~`` and the anti part of ``C~`` from the expanded ``D^3 x^k`` and compare with the closed forms."""
    n = bundle.n
    closed = tilde_closed_form(bundle)
    _, _, closed_anti = z3_split(closed.ctilde)
    rep = Report("covariant expansion", {"n": n})
    for k in range(n):
        _, bt, ct = covariant_d3(bundle, k)
        bad_b = [(l, m) for (l, m) in bt if bt[l, m] != closed.btilde[k, l, m]]
        bad_c = [idx for idx in ct if ct[idx] != closed_anti[(k,) + idx]]
        rep.add(f"B~^{k + 1} from D^3 x^{k + 1} matches closed form", not bad_b, str(bad_b[:4]))
        rep.add(f"C~^{k + 1}_[lmn] from D^3 x^{k + 1} matches closed form", not bad_c,
                str(bad_c[:4]))
    return rep


# -- chart changes ----------------------------------------------------------


def _chart_data(chart: PolyMap):
    n = chart.n
    U = chart.jacobian_inverse()
    V = [[compose(v, chart, "inverse") for v in row] for row in chart.jacobian_forward()]
    H = {(i, b, c): U[i][b].partial(c) for i, b, c in product(range(n), repeat=3)}
    return U, V, H


def _contract_lower(t: dict, U, slot: int, n: int) -> dict:
    out = {}
    for idx in t:
        acc = _zero(n)
        for j in range(n):
            src = idx[:slot] + (j,) + idx[slot + 1:]
            v = t[src]
            if v and U[j][idx[slot]]:
                acc = acc + v * U[j][idx[slot]]
        out[idx] = acc
    return out


def tensor_transform(t: dict, chart: PolyMap) -> dict:
    """``T'^a_{b...} = V^a_i T^i_{j...}(x(y)) U^j_b ...`` as polynomials in ``y``."""
    n = chart.n
    U, V, _ = _chart_data(chart)
    cur = {idx: compose(v, chart, "inverse") for idx, v in t.items()}
    rank = len(next(iter(t)))
    for slot in range(1, rank):
        cur = _contract_lower(cur, U, slot, n)
    out = {}
    for idx in cur:
        acc = _zero(n)
        for i in range(n):
            v = cur[(i,) + idx[1:]]
            if v and V[idx[0]][i]:
                acc = acc + V[idx[0]][i] * v
        out[idx] = acc
    return out


def _connection_transform(t: dict, chart: PolyMap) -> dict:
    n = chart.n
    _, V, H = _chart_data(chart)
    hom = tensor_transform(t, chart)
    out = {}
    for a, b, c in hom:
        acc = hom[a, b, c]
        for i in range(n):
            if V[a][i] and H[i, b, c]:
                acc = acc + V[a][i] * H[i, b, c]
        out[a, b, c] = acc
    return out


def transform_bundle(bundle: ConnectionBundle, chart: PolyMap) -> ConnectionBundle:
    """Coefficients in the new chart ``y``.

    ``Gamma`` and ``B`` pick up the inhomogeneous term ``V d^2x/dy dy``; ``C``
    transforms as a tensor.  With these rules ``B~`` is a tensor and so is the
    anti part of ``C~``, which is all that ``D^3 x`` sees.
    """
    if chart.n != bundle.n:
        raise ValueError("chart and bundle dimensions differ")
    return ConnectionBundle(
        bundle.n,
        _connection_transform(bundle.gamma, chart),
        _connection_transform(bundle.bcoef, chart),
        tensor_transform(bundle.ccoef, chart),
    )


def verify_tensoriality(bundle: ConnectionBundle, chart: PolyMap) -> Report:
    rep = Report("covariant tensoriality", {"n": bundle.n})
    new = transform_bundle(bundle, chart)
    old_t = tilde_closed_form(bundle)
    new_t = tilde_closed_form(new)
    moved_b = tensor_transform(old_t.btilde, chart)
    bad_b = [idx for idx in moved_b if moved_b[idx] != new_t.btilde[idx]]
    rep.add("B~ transforms as a tensor", not bad_b, str(bad_b[:4]))
    _, _, old_anti = z3_split(old_t.ctilde)
    _, _, new_anti = z3_split(new_t.ctilde)
    moved_c = tensor_transform(old_anti, chart)
    bad_c = [idx for idx in moved_c if moved_c[idx] != new_anti[idx]]
    rep.add("C~_[lmn] transforms as a tensor", not bad_c, str(bad_c[:4]))
    # D^2 x is tensorial: its Gamma part reproduces the chart's second derivatives
    _, V, H = _chart_data(chart)
    moved_g = tensor_transform(bundle.gamma, chart)
    bad_g = []
    for a, b, c in moved_g:
        inhom = new.gamma[a, b, c] - moved_g[a, b, c]
        want = _zero(bundle.n)
        for i in range(bundle.n):
            want = want + V[a][i] * H[i, b, c]
        if inhom != want:
            bad_g.append((a, b, c))
    rep.add("Gamma inhomogeneous term equals V d2x/dy dy", not bad_g, str(bad_g[:4]))
    return rep


# -- reality and curvature --------------------------------------------------


def _split_real(p: CoeffPoly):
    """``p = re + (q - q^2) im`` for ``p`` with coefficients in ``Q(q)``."""
    re, im = {}, {}
    for e, c in p.terms.items():
        a, b = c.coeffs[0], (c.coeffs[1] if len(c.coeffs) > 1 else Fraction(0))
        if a - b / 2:
            re[e] = FIELD.rational(a - b / 2)
        if b:
            im[e] = FIELD.rational(b / 2)
    return CoeffPoly(FIELD, p.nvars, re), CoeffPoly(FIELD, p.nvars, im)


def _is_real(p: CoeffPoly) -> bool:
    return all(c.is_rational() for c in p.terms.values())


def torsion_and_reality(bundle: ConnectionBundle) -> Report:
    """Write ``B~ = re + i sqrt(3) im`` exactly and compare ``im`` with the torsion."""
    n = bundle.n
    if not all(_is_real(v) for t in (bundle.gamma, bundle.bcoef) for v in t.values()):
        raise ValueError("reality decomposition needs rational Gamma and B")
    bt = tilde_closed_form(bundle).btilde
    g = bundle.gamma
    isqrt3 = Q - Q2
    rep = Report("torsion and reality", {"n": n})
    bad_re, bad_im, bad_rec = [], [], []
    torsion_zero = True
    imag_zero = True
    for k, l, m in bt:
        re, im = _split_real(bt[k, l, m])
        if re + im.scale(isqrt3) != bt[k, l, m]:
            bad_rec.append((k, l, m))
        if re != bundle.bcoef[k, l, m] - (g[k, l, m] + g[k, m, l]).scale(Fraction(1, 2)):
            bad_re.append((k, l, m))
        torsion = (g[k, l, m] - g[k, m, l]).scale(Fraction(1, 2))
        if im != torsion:
            bad_im.append((k, l, m))
        torsion_zero &= torsion.is_zero()
        imag_zero &= im.is_zero()
    rep.add("B~ = re + (q - q^2) im exactly", not bad_rec, str(bad_rec[:4]))
    rep.add("real part equals B - Gamma_(lm)", not bad_re, str(bad_re[:4]))
    rep.add("coefficient of i sqrt(3) equals the torsion S", not bad_im, str(bad_im[:4]))
    rep.add("B~ real iff torsion vanishes", imag_zero == torsion_zero)
    rep.extra["torsion_free"] = torsion_zero
    return rep


def riemann_tensor(gamma: dict, n: int) -> dict:
    """``R^k_lmn = d_l G^k_mn - d_m G^k_ln + G^k_lr G^r_mn - G^k_mr G^r_ln``."""
    out = {}
    for k, l, m, s in product(range(n), repeat=4):
        v = gamma[k, m, s].partial(l) - gamma[k, l, s].partial(m)
        for r in range(n):
            v = v + gamma[k, l, r] * gamma[r, m, s] - gamma[k, m, r] * gamma[r, l, s]
        out[k, l, m, s] = v
    return out


def _riemann_display(R: dict) -> dict:
    out = {}
    for k, l, m, s in R:
        out[k, l, m, s] = ((R[k, s, l, m] + R[k, m, l, s]).scale(THIRD)
                           + (R[k, m, s, l] + R[k, l, s, m]).scale(Q * THIRD)
                           + (R[k, l, m, s] + R[k, s, m, l]).scale(Q2 * THIRD))
    return out


RIEMANN_NORMALIZATION = FIELD.rational(Fraction(-1, 3))


def riemann_identification(gamma: dict, n: int) -> Report:
    """Compare the anti part of the connection terms of ``C~`` with the Riemann combination.

    Two checks: the combination exactly as printed, and the same combination
    scaled by the factor ``-1/3`` that the exact computation produces under
    this module's Riemann convention.
    """
    gamma = _full(n, 3, gamma)
    if any(gamma[k, l, m] != gamma[k, m, l] for k, l, m in gamma):
        raise NonSymmetricGamma("Riemann identification needs a symmetric connection")
    conn = tilde_closed_form(ConnectionBundle(n, gamma)).ctilde
    _, _, anti = z3_split(conn)
    disp = _riemann_display(riemann_tensor(gamma, n))
    rep = Report("covariant riemann", {"n": n})
    bad = [idx for idx in anti if anti[idx] != disp[idx]]
    rep.add("anti part of connection terms equals the printed Riemann combination", not bad,
            f"first mismatch at {bad[0]}: {anti[bad[0]]} vs {disp[bad[0]]}" if bad else None)
    bad_n = [idx for idx in anti if anti[idx] != disp[idx].scale(RIEMANN_NORMALIZATION)]
    rep.add("anti part equals -1/3 times the printed Riemann combination", not bad_n,
            str(bad_n[:4]))
    return rep


def conjugate_constraint_holds(ccoef: dict) -> bool:
    """Whether ``C^k_{mnl}`` (q^2 part) equals ``C^k_[lnm]`` (q part) for all indices."""
    _, conj, anti = z3_split(ccoef)
    return all(conj[k, m, s, l] == anti[k, l, s, m] for k, l, m, s in ccoef)


# -- third-order geodesics --------------------------------------------------


def _compile(poly: CoeffPoly):
    items = []
    for e, c in poly.terms.items():
        if not c.is_rational():
            raise ValueError(f"geodesic coefficient {c} is not real")
        items.append((float(c.to_fraction()), e))
    return items


def _eval_items(items, x):
    total = 0.0
    for c, e in items:
        v = c
        for xi, k in zip(x, e):
            if k:
                v *= xi ** k
        total += v
    return total


@dataclass(frozen=True)
class GeodesicCoefficients:
    """``ef`` is ``E^k_lm + F^k_ml`` contracted with ``v^l (D^2x)^m``; ``g3`` is symmetrized on input."""

    n: int
    ef: dict
    g3: dict
    gamma: dict = None

    def __post_init__(self):
        n = self.n
        ef = _full(n, 3, self.ef)
        g3 = _full(n, 4, self.g3)
        sym = {}
        for k, l, m, s in g3:
            acc = _zero(n)
            perms = [(l, m, s), (l, s, m), (m, l, s), (m, s, l), (s, l, m), (s, m, l)]
            for a, b, c in perms:
                acc = acc + g3[k, a, b, c]
            sym[k, l, m, s] = acc.scale(Fraction(1, 6))
        gamma = _full(n, 3, self.gamma or {})
        object.__setattr__(self, "ef", ef)
        object.__setattr__(self, "g3", sym)
        object.__setattr__(self, "gamma", gamma)

    def compiled(self):
        return (
            {k: _compile(v) for k, v in self.ef.items() if v},
            {k: _compile(v) for k, v in self.g3.items() if v},
            {k: _compile(v) for k, v in self.gamma.items() if v},
        )


def _rhs_factory(coeffs: GeodesicCoefficients):
    n = coeffs.n
    ef, g3, gamma = coeffs.compiled()

    def rhs(state):
        x, v, a = state[:n], state[n:2 * n], state[2 * n:]
        cov = a.copy()
        for (m, r, s), it in gamma.items():
            cov[m] += _eval_items(it, x) * v[r] * v[s]
        jerk = np.zeros(n)
        for (k, l, m), it in ef.items():
            jerk[k] -= _eval_items(it, x) * v[l] * cov[m]
        for (k, l, m, s), it in g3.items():
            jerk[k] -= _eval_items(it, x) * v[l] * v[m] * v[s]
        return np.concatenate([v, a, jerk])

    return rhs


def geodesic3_integrate(coeffs: GeodesicCoefficients, x0, v0, a0, lambda_span, step: float):
    """Classical RK4 on ``(x, x', x'')``; returns ``(lambdas, states)`` with states of shape ``(steps+1, 3n)``."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = coeffs.n
    lam0, lam1 = float(lambda_span[0]), float(lambda_span[1])
    steps = max(1, int(round((lam1 - lam0) / step)))
    h = (lam1 - lam0) / steps
    state = np.array(list(x0) + list(v0) + list(a0), dtype=float)
    if state.shape != (3 * n,):
        raise ValueError(f"initial data must be three {n}-vectors")
    rhs = _rhs_factory(coeffs)
    out = np.empty((steps + 1, 3 * n))
    out[0] = state
    # overflow is reported through NonFiniteState rather than numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(steps):
            k1 = rhs(state)
            k2 = rhs(state + h / 2 * k1)
            k3 = rhs(state + h / 2 * k2)
            k4 = rhs(state + h * k3)
            state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(state)):
                raise NonFiniteState(f"state left the representable range at step {i + 1}")
            out[i + 1] = state
    lams = lam0 + h * np.arange(steps + 1)
    return lams, out


def richardson_ratio(coeffs: GeodesicCoefficients, x0, v0, a0, lambda_span, step: float,
                     refine: int = 16) -> float:
    """``err(h) / err(h/2)`` at the end point against a run with step ``h / refine``."""
    _, ref = geodesic3_integrate(coeffs, x0, v0, a0, lambda_span, step / refine)
    _, s1 = geodesic3_integrate(coeffs, x0, v0, a0, lambda_span, step)
    _, s2 = geodesic3_integrate(coeffs, x0, v0, a0, lambda_span, step / 2)
    e1 = float(np.max(np.abs(s1[-1] - ref[-1])))
    e2 = float(np.max(np.abs(s2[-1] - ref[-1])))
    return e1 / e2 if e2 else math.inf
