"""The one-variable N = 3 calculus: forms in ``t`` with powers of ``d^2 t``.

Even forms of degree ``2m`` are ``phi (d2t)^m + psi (dt)^2 (d2t)^(m-1)`` and odd
forms of degree ``2m+1`` are ``eta dt (d2t)^m``.  Coefficients are
polynomials in one variable.  Every class embeds into the ``free`` mode of
:mod:`qcalc.forms`, which the tests use as an independent cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .forms import Form, FormSpace, form_mul
from .scalar import CycScalar, CyclotomicField
from .symfun import CoeffPoly, MismatchedArity

__all__ = [
    "EvenForm1D",
    "OddForm1D",
    "NotClosed",
    "NotAPerfectSquare",
    "OddPower",
    "BadInterval",
    "NonPositiveMetric",
    "d1",
    "primitive",
    "pullback",
    "pullback_by_substitution",
    "poly_sqrt",
    "sqrt_even",
    "integrate_iab",
    "adaptive_simpson",
    "LengthResult",
    "curve_length",
    "curve_length_detail",
    "FIELD",
    "SPACE",
]

FIELD = CyclotomicField(3)
SPACE = FormSpace(3, 1, "free")

DT = (1, 0)
D2T = (2, 0)


class NotClosed(ValueError):
    pass


class NotAPerfectSquare(ValueError):
    pass


class OddPower(ValueError):
    pass


class BadInterval(ValueError):
    pass


class NonPositiveMetric(ValueError):
    pass


def _poly(c) -> CoeffPoly:
    if isinstance(c, CoeffPoly):
        if c.nvars != 1:
            raise MismatchedArity("one-dimensional forms take polynomials in t")
        return c
    return CoeffPoly.constant(FIELD, 1, c)


def _zero() -> CoeffPoly:
    return CoeffPoly.zero(FIELD, 1)


@dataclass(frozen=True)
class EvenForm1D:
    m: int
    phi: CoeffPoly
    psi: CoeffPoly = None

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")
        object.__setattr__(self, "phi", _poly(self.phi))
        psi = _zero() if self.psi is None else _poly(self.psi)
        if self.m == 0 and psi:
            raise ValueError("a degree-0 form has no psi part")
        object.__setattr__(self, "psi", psi)

    @property
    def degree(self) -> int:
        return 2 * self.m

    def to_form(self) -> Form:
        terms = {}
        if self.phi:
            terms[(D2T,) * self.m] = self.phi
        if self.psi:
            terms[(DT, DT) + (D2T,) * (self.m - 1)] = self.psi
        return Form(SPACE, terms)

    def is_zero(self) -> bool:
        return not self.phi and not self.psi

    def __str__(self) -> str:
        text = f"({self.phi.to_string(['t'])})(d2t)^{self.m}"
        if self.m:
            text += f" + ({self.psi.to_string(['t'])})(dt)^2(d2t)^{self.m - 1}"
        return text


@dataclass(frozen=True)
class OddForm1D:
    m: int
    eta: CoeffPoly

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")
        object.__setattr__(self, "eta", _poly(self.eta))

    @property
    def degree(self) -> int:
        return 2 * self.m + 1

    def to_form(self) -> Form:
        return Form(SPACE, {(DT,) + (D2T,) * self.m: self.eta} if self.eta else {})

    def is_zero(self) -> bool:
        return not self.eta

    def __str__(self) -> str:
        return f"({self.eta.to_string(['t'])}) dt (d2t)^{self.m}"


def from_form(form: Form, degree: int):
    """Read a free-mode form of the given degree back into its 1-D class."""
    if degree % 2:
        m = (degree - 1) // 2
        eta = form.coefficient((DT,) + (D2T,) * m)
        rest = {w for w in form.terms if w != (DT,) + (D2T,) * m}
        if rest:
            raise ValueError(f"form has terms outside degree {degree}")
        return OddForm1D(m, eta)
    m = degree // 2
    phi = form.coefficient((D2T,) * m)
    psi = form.coefficient((DT, DT) + (D2T,) * (m - 1)) if m else _zero()
    allowed = {(D2T,) * m, (DT, DT) + (D2T,) * (m - 1)}
    if set(form.terms) - allowed:
        raise ValueError(f"form has terms outside degree {degree}")
    return EvenForm1D(m, phi, psi)


def d1(x):
    """Differential: even ``(phi, psi, m)`` goes to odd ``(m, phi' - psi)``; odd ``(m, eta)`` to even ``(m+1, eta, eta')``."""
    if isinstance(x, EvenForm1D):
        return OddForm1D(x.m, x.phi.partial(0) - x.psi)
    if isinstance(x, OddForm1D):
        return EvenForm1D(x.m + 1, x.eta, x.eta.partial(0))
    raise TypeError(f"not a one-dimensional form: {x!r}")


def is_closed(x) -> bool:
    return d1(x).is_zero()


def primitive(omega: EvenForm1D) -> OddForm1D:
    if omega.m < 1:
        raise NotClosed("degree-0 forms are closed only when constant and are not exact")
    if omega.phi.partial(0) != omega.psi:
        raise NotClosed("phi' differs from psi")
    return OddForm1D(omega.m - 1, omega.phi)


def _q_integer(m: int) -> CycScalar:
    total = FIELD.zero()
    for j in range(m):
        total = total + FIELD.q_power(j)
    return total


def pullback(x, t_of_tau: CoeffPoly, law: str = "natural"):
    """Reparametrize by ``t = t(tau)``; the result is written in ``tau``.

    ``law="natural"`` expands ``(d2t)^m`` with the function/``d2t``
    commutation rule, giving ``psi~ = m t'^(m-1) t'' phi + t'^(m+1) psi``; this
    is the law that commutes with ``d``.  ``law="commuting"`` treats
    coefficients as commuting with ``d2t`` and puts ``[m]_q`` in place of
    ``m``; the two agree for ``m <= 1``.
    """
    if law not in ("natural", "commuting"):
        raise ValueError(f"unknown pullback law {law!r}")
    t_of_tau = _poly(t_of_tau)
    tp = t_of_tau.partial(0)
    tpp = tp.partial(0)

    def comp(f: CoeffPoly) -> CoeffPoly:
        return f.substitute([t_of_tau])

    if isinstance(x, OddForm1D):
        return OddForm1D(x.m, tp ** (x.m + 1) * comp(x.eta))
    if isinstance(x, EvenForm1D):
        m = x.m
        phi = comp(x.phi)
        psi = comp(x.psi)
        new_phi = tp ** m * phi
        if m == 0:
            return EvenForm1D(0, new_phi)
        mult = FIELD.rational(m) if law == "natural" else _q_integer(m)
        new_psi = (tp ** (m - 1) * tpp * phi).scale(mult) + tp ** (m + 1) * psi
        return EvenForm1D(m, new_phi, new_psi)
    raise TypeError(f"not a one-dimensional form: {x!r}")


def pullback_by_substitution(form: Form, t_of_tau: CoeffPoly) -> Form:
    """Substitute ``dt = t' dtau`` and ``d2t = t'' dtau^2 + t' d2tau`` letter by letter.

    Products go through :func:`qcalc.forms.form_mul`, so the coefficients
    ``t'`` and ``t''`` cross ``d2tau`` with the commutation rule.
    """
    t_of_tau = _poly(t_of_tau)
    tp = t_of_tau.partial(0)
    tpp = tp.partial(0)
    dt_image = Form(SPACE, {(DT,): tp})
    d2t_image = Form(SPACE, {(DT, DT): tpp, (D2T,): tp}) if tpp else Form(SPACE, {(D2T,): tp})
    acc = SPACE.zero()
    for word, c in form.terms.items():
        piece = SPACE.function(c.substitute([t_of_tau]))
        for letter in word:
            piece = form_mul(piece, dt_image if letter == DT else d2t_image)
        acc = acc + piece
    return acc


def _scalar_sqrt(c: CycScalar) -> CycScalar:
    if not c.is_rational():
        raise NotAPerfectSquare(f"coefficient {c} is not a rational square")
    fr = c.to_fraction()
    if fr < 0:
        raise NotAPerfectSquare(f"negative leading coefficient {fr}")
    num, den = math.isqrt(fr.numerator), math.isqrt(fr.denominator)
    if num * num != fr.numerator or den * den != fr.denominator:
        raise NotAPerfectSquare(f"{fr} is not a rational square")
    return FIELD.rational(Fraction(num, den))


def poly_sqrt(p: CoeffPoly) -> CoeffPoly:
    """Exact square root of a univariate polynomial (positive leading coefficient)."""
    p = _poly(p)
    if not p:
        return p
    deg = p.degree()
    if deg % 2:
        raise NotAPerfectSquare("odd degree")
    lead = p.terms[(deg,)]
    s_terms = {(deg // 2,): _scalar_sqrt(lead)}
    s = CoeffPoly(FIELD, 1, s_terms)
    two_lead = s_terms[(deg // 2,)] * 2
    rem = p - s * s
    while rem:
        rdeg = rem.degree()
        k = rdeg - deg // 2
        if k < 0:
            raise NotAPerfectSquare(f"nonzero remainder {rem}")
        term = CoeffPoly(FIELD, 1, {(k,): rem.terms[(rdeg,)] / two_lead})
        s = s + term
        rem = p - s * s
        if rem and rem.degree() >= rdeg:
            raise NotAPerfectSquare(f"nonzero remainder {rem}")
    return s


def sqrt_even(omega: EvenForm1D) -> OddForm1D:
    """Solve ``theta^2 = psi (dt)^2 (d2t)^(2l)``: ``theta = q^(-l) sqrt(psi) dt (d2t)^l``."""
    if omega.phi or omega.m == 0:
        raise NotAPerfectSquare("only forms psi (dt)^2 (d2t)^(2l) have square roots")
    power = omega.m - 1
    if power % 2:
        raise OddPower(f"(d2t) power {power} is odd")
    l = power // 2
    sigma = poly_sqrt(omega.psi)
    return OddForm1D(l, sigma.scale(FIELD.q_power(-l)))


def integrate_iab(theta: OddForm1D, a, b) -> EvenForm1D:
    """``(integral of eta from a to b) (d2t)^m``: a closed even form with constant phi."""
    a, b = Fraction(a), Fraction(b)
    if a >= b:
        raise BadInterval(f"need a < b, got [{a}, {b}]")
    prim = theta.eta.antiderivative(0)
    value = prim.evaluate([b]) - prim.evaluate([a])
    return EvenForm1D(theta.m, CoeffPoly.constant(FIELD, 1, value))


# -- numerical length --------------------------------------------------------


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-9, max_depth: int = 60) -> tuple[float, int]:
    """Adaptive Simpson with Richardson correction; returns ``(value, evaluations)``."""
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    evals = 3
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    total = 0.0
    # explicit stack, left intervals first so the summation order is fixed
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = (lo + hi) / 2
        lm, rm = (lo + mid) / 2, (mid + hi) / 2
        flm, frm = f(lm), f(rm)
        evals += 2
        left = (mid - lo) / 6 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6 * (fmid + 4 * frm + fhi)
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15 * eps:
            total += left + right + delta / 15
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
    return total, evals


@dataclass(frozen=True)
class LengthResult:
    length: float
    tolerance: float
    evaluations: int


def _entry_fn(g):
    if isinstance(g, CoeffPoly):
        fn = g.to_float_function()
        return lambda x: fn(x)
    if callable(g):
        return g
    val = float(g)
    return lambda x: val


def curve_length_detail(metric, curve, a, b, velocity=None, tol: float = 1e-9,
                        samples: int = 64) -> LengthResult:
    """Length of ``curve`` on ``[a, b]`` in the metric ``g_ij``.

    ``curve`` holds polynomials in ``t`` or callables; callables need the
    matching ``velocity`` callables.  Metric entries are polynomials in the
    chart coordinates, callables on a point, or numbers.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise BadInterval(f"need a < b, got [{a}, {b}]")
    n = len(curve)
    if len(metric) != n or any(len(row) != n for row in metric):
        raise MismatchedArity(f"metric must be {n}x{n}")
    if all(isinstance(c, CoeffPoly) for c in curve):
        pos = [c.to_float_function() for c in curve]
        vel = [c.partial(0).to_float_function() for c in curve]
        xs = [lambda t, p=p: p((t,)) for p in pos]
        vs = [lambda t, v=v: v((t,)) for v in vel]
    else:
        if velocity is None:
            raise ValueError("callable curves need velocity callables")
        xs = [c if callable(c) else _entry_fn(c) for c in curve]
        vs = list(velocity)
    g = [[_entry_fn(e) for e in row] for row in metric]

    def gmat(t):
        x = tuple(fx(t) for fx in xs)
        return np.array([[g[i][j](x) for j in range(n)] for i in range(n)], dtype=float)

    for t in np.linspace(a, b, samples):
        mat = gmat(float(t))
        if np.min(np.linalg.eigvalsh((mat + mat.T) / 2)) <= 0:
            raise NonPositiveMetric(f"metric is not positive-definite at t={t}")

    def speed(t):
        v = np.array([fv(t) for fv in vs], dtype=float)
        val = float(v @ gmat(t) @ v)
        return math.sqrt(max(val, 0.0))

    value, evals = adaptive_simpson(speed, a, b, tol)
    return LengthResult(value, tol, evals)


def curve_length(metric, curve, a, b, velocity=None, tol: float = 1e-9) -> float:
    return curve_length_detail(metric, curve, a, b, velocity, tol).length


def line_element(metric: Sequence[Sequence[CoeffPoly]], curve: Sequence[CoeffPoly]) -> EvenForm1D:
    """Pull ``g_ij dx^i dx^j`` back to ``psi (dt)^2`` along a polynomial curve."""
    n = len(curve)
    vel = [c.partial(0) for c in curve]
    psi = _zero()
    for i in range(n):
        for j in range(n):
            psi = psi + metric[i][j].substitute(list(curve)) * vel[i] * vel[j]
    return EvenForm1D(1, _zero(), psi)
