"""The Fricke cubic surface of the sixth Painleve equation.

``F(X, a) = X0 Xt X1 + X0**2 + Xt**2 + X1**2 - A0 X0 - At Xt - A1 X1 + Ainf``
with ``A_i = a_i a_inf + a_j a_k`` and
``Ainf = a0 at a1 ainf + a0**2 + at**2 + a1**2 + ainf**2 - 4``, where
``a_l = e_l + 1/e_l``.  Indices are ``0, "t", 1`` (positions 0, 1, 2) and the
cyclic order is ``(0, t, 1)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .errors import QDomainError

__all__ = [
    "ThetaParams",
    "ACoeffs",
    "SurfacePoint",
    "Line",
    "SmoothnessReport",
    "FiberClass",
    "a_to_A",
    "fricke_eval",
    "goldman_bracket",
    "gradient_determinant",
    "lines_24",
    "duplicate_lines",
    "smoothness",
    "two_line_values",
    "classify_fiber",
    "jimbo_param",
    "jimbo_d_coefficients",
    "jimbo_param_d",
    "jimbo_parameter_of",
    "jimbo_cross_check",
    "surface_point",
    "involution",
    "orbit",
    "singular_point_search",
]

NAMES = ("0", "t", "1")


def _idx(l) -> int:
    key = str(l)
    if key not in NAMES:
        raise QDomainError(f"index must be one of 0, 't', 1; got {l!r}")
    return NAMES.index(key)


def _cyclic(k: int) -> tuple[int, int]:
    """The pair ``(i, j)`` with ``(i, j, k)`` a cyclic shift of ``(0, t, 1)``."""
    return (k + 1) % 3, (k + 2) % 3


@dataclass(frozen=True)
class ThetaParams:
    """Eigenvalue data ``e = (e0, et, e1, einf)`` and traces ``a_l = e_l + 1/e_l``."""

    e: tuple
    a: tuple = field(init=False)

    def __post_init__(self):
        e = tuple(complex(v) for v in self.e)
        if len(e) != 4 or any(v == 0 for v in e):
            raise QDomainError("need four nonzero eigenvalues (e0, et, e1, einf)")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "a", tuple(v + 1 / v for v in e))

    @classmethod
    def from_a(cls, a: Sequence[complex]) -> "ThetaParams":
        """Pick ``e_l`` with ``e_l + 1/e_l = a_l`` (the root with ``|e| >= 1``)."""
        es = []
        for al in a:
            al = complex(al)
            r = cmath.sqrt(al * al - 4)
            e = (al + r) / 2
            if abs(e) < 1:
                e = (al - r) / 2
            es.append(e)
        return cls(tuple(es))

    @classmethod
    def from_thetas(cls, th: Sequence[complex]) -> "ThetaParams":
        """``e_l = exp(i pi theta_l)``, so ``a_l = 2 cos(pi theta_l)``."""
        return cls(tuple(cmath.exp(1j * math.pi * complex(t)) for t in th))

    def to_json(self) -> dict:
        from .serialize import cjson

        return {"e": [cjson(v) for v in self.e], "a": [cjson(v) for v in self.a]}


def _as_a(a) -> tuple:
    if isinstance(a, ThetaParams):
        return a.a
    a = tuple(complex(v) for v in a)
    if len(a) != 4:
        raise QDomainError("a needs four entries (a0, at, a1, ainf)")
    return a


@dataclass(frozen=True)
class ACoeffs:
    A0: complex
    At: complex
    A1: complex
    Ainf: complex

    def finite(self) -> tuple:
        return (self.A0, self.At, self.A1)


def a_to_A(a) -> ACoeffs:
    """``A_i = a_i a_inf + a_j a_k`` for ``i = 0, t, 1`` and the constant term ``Ainf``.

    >>> a_to_A((0, 0, 0, 0))
    ACoeffs(A0=0j, At=0j, A1=0j, Ainf=(-4+0j))
    """
    a0, at, a1, ai = _as_a(a)
    return ACoeffs(
        a0 * ai + at * a1,
        at * ai + a0 * a1,
        a1 * ai + a0 * at,
        a0 * at * a1 * ai + a0 ** 2 + at ** 2 + a1 ** 2 + ai ** 2 - 4,
    )


@dataclass(frozen=True)
class SurfacePoint:
    X: tuple
    F: complex
    on_surface: bool

    def to_json(self) -> dict:
        from .serialize import cjson

        return {"X": [cjson(v) for v in self.X], "F": cjson(self.F), "on_surface": self.on_surface}


def _scale(X, A: ACoeffs) -> float:
    X0, Xt, X1 = X
    terms = [X0 * Xt * X1, X0 ** 2, Xt ** 2, X1 ** 2, A.A0 * X0, A.At * Xt, A.A1 * X1, A.Ainf]
    return max(1.0, max(abs(t) for t in terms))


def fricke_eval(X, a) -> tuple[complex, tuple]:
    """``F(X, a)`` and its gradient ``F_{X_i} = X_j X_k + 2 X_i - A_i``."""
    X0, Xt, X1 = (complex(v) for v in X)
    A = a_to_A(a)
    F = X0 * Xt * X1 + X0 ** 2 + Xt ** 2 + X1 ** 2 - A.A0 * X0 - A.At * Xt - A.A1 * X1 + A.Ainf
    grad = (Xt * X1 + 2 * X0 - A.A0, X0 * X1 + 2 * Xt - A.At, X0 * Xt + 2 * X1 - A.A1)
    return F, grad


def surface_point(X, a, tol: float = 1e-10) -> SurfacePoint:
    F, _ = fricke_eval(X, a)
    X = tuple(complex(v) for v in X)
    return SurfacePoint(X, F, abs(F) <= tol * _scale(X, a_to_A(a)))


def goldman_bracket(X, a, i, j) -> complex:
    """``{X_i, X_j} = F_{X_k}`` for ``(i, j, k)`` cyclic in ``(0, t, 1)``; antisymmetric otherwise."""
    ii, jj = _idx(i), _idx(j)
    if ii == jj:
        return 0j
    kk = 3 - ii - jj
    _, grad = fricke_eval(X, a)
    sign = 1 if _cyclic(kk) == (ii, jj) else -1
    return sign * grad[kk]


def gradient_determinant(X, a, k=1) -> complex:
    """The 4x4 Gram-type determinant equal to ``F_{X_k}**2 - 4 F``.

    For ``k = 1`` the matrix is
    ``[[2, -a0, -a1, X0], [-a0, 2, Xt, -ainf], [-a1, Xt, 2, -at], [X0, -ainf, -at, 2]]``
    and the other cases follow by cyclic permutation of ``(0, t, 1)``.  On the
    surface it therefore equals ``F_{X_k}**2``.
    """
    kk = _idx(k)
    ii, jj = _cyclic(kk)
    av = _as_a(a)
    ai = av[3]
    X = tuple(complex(v) for v in X)
    m = np.array([
        [2, -av[ii], -av[kk], X[ii]],
        [-av[ii], 2, X[jj], -ai],
        [-av[kk], X[jj], 2, -av[jj]],
        [X[ii], -ai, -av[jj], 2],
    ], dtype=complex)
    return complex(np.linalg.det(m))


# ---------------------------------------------------------------------------
# the 24 lines


@dataclass(frozen=True)
class Line:
    """``{X_k = const, ci X_i + cj X_j = rhs}`` inside the plane ``X_k = const``."""

    k: int
    const: complex
    i: int
    j: int
    ci: complex
    cj: complex
    rhs: complex
    family: int

    def point(self, t: complex) -> tuple:
        # base point plus t times the direction (cj, -ci)
        if abs(self.ci) >= abs(self.cj):
            base_i, base_j = self.rhs / self.ci, 0j
        else:
            base_i, base_j = 0j, self.rhs / self.cj
        X = [0j, 0j, 0j]
        X[self.k] = self.const
        X[self.i] = base_i + t * self.cj
        X[self.j] = base_j - t * self.ci
        return tuple(X)

    def normalized(self) -> tuple:
        """Canonical coefficients for comparison: ``(k, const, ci, cj, rhs) / leading``."""
        lead = self.ci if abs(self.ci) >= abs(self.cj) else self.cj
        return (self.k, self.const, self.ci / lead, self.cj / lead, self.rhs / lead)

    def to_json(self) -> dict:
        from .serialize import cjson

        return {
            "plane": f"X{NAMES[self.k]}", "const": cjson(self.const),
            "coeffs": {f"X{NAMES[self.i]}": cjson(self.ci), f"X{NAMES[self.j]}": cjson(self.cj)},
            "rhs": cjson(self.rhs), "family": self.family,
        }


def lines_24(e) -> list[Line]:
    """The 24 affine lines of the surface (8 in each plane family ``X_k = const``)."""
    tp = e if isinstance(e, ThetaParams) else ThetaParams(tuple(e))
    ev, av = tp.e, tp.a
    einf, ainf = ev[3], av[3]
    out = []
    for k in range(3):
        i, j = _cyclic(k)
        ei, ej, ek = ev[i], ev[j], ev[k]
        ai_, aj, ak = av[i], av[j], av[k]
        c1 = ei / ej + ej / ei
        c2 = ei * ej + 1 / (ei * ej)
        c3 = ek / einf + einf / ek
        c4 = ek * einf + 1 / (ek * einf)
        fams = [
            (c1, ei, ej, ainf + ei * ej * ak),
            (c1, ej, ei, ak + ei * ej * ainf),
            (c2, 1.0, ei * ej, ej * ak + ei * ainf),
            (c2, ei * ej, 1.0, ej * ainf + ei * ak),
            (c3, einf, ek, ai_ + ek * einf * aj),
            (c3, ek, einf, aj + ek * einf * ai_),
            (c4, 1.0, ek * einf, ek * aj + einf * ai_),
            (c4, ek * einf, 1.0, ek * ai_ + einf * aj),
        ]
        for n, (c, ci, cj, rhs) in enumerate(fams, start=1):
            out.append(Line(k, complex(c), i, j, complex(ci), complex(cj), complex(rhs), n))
    return out


def duplicate_lines(lines: Sequence[Line], tol: float = 1e-9) -> list[tuple[int, int]]:
    """Index pairs of coinciding lines."""
    out = []
    norm = [ln.normalized() for ln in lines]
    for a, b in combinations(range(len(lines)), 2):
        na, nb = norm[a], norm[b]
        if na[0] != nb[0]:
            continue
        if all(abs(u - v) <= tol * max(1.0, abs(u)) for u, v in zip(na[1:], nb[1:])):
            out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# smoothness and fibers


@dataclass(frozen=True)
class SmoothnessReport:
    products: dict
    smooth: bool
    resonant: tuple
    lines_distinct: bool
    two_line_values_distinct: bool

    def to_json(self) -> dict:
        from .serialize import cjson

        return {
            "products": {k: cjson(v) for k, v in self.products.items()},
            "smooth": self.smooth,
            "resonant": list(self.resonant),
            "lines_distinct": self.lines_distinct,
            "two_line_values_distinct": self.two_line_values_distinct,
        }


def two_line_values(e, l=0) -> tuple:
    """The four values of ``X_l`` whose fiber degenerates into two lines.

    With ``(i, j)`` the other two finite indices: ``e_i/e_j + e_j/e_i``,
    ``e_i e_j + 1/(e_i e_j)``, ``e_l/e_inf + e_inf/e_l``, ``e_l e_inf + 1/(e_l e_inf)``.
    """
    tp = e if isinstance(e, ThetaParams) else ThetaParams(tuple(e))
    k = _idx(l)
    i, j = _cyclic(k)
    ev = tp.e
    ei, ej, ek, einf = ev[i], ev[j], ev[k], ev[3]
    return (ei / ej + ej / ei, ei * ej + 1 / (ei * ej), ek / einf + einf / ek, ek * einf + 1 / (ek * einf))


def smoothness(e, tol: float = 1e-9) -> SmoothnessReport:
    """The eight products ``e0 et**+-1 e1**+-1 einf**+-1`` against 1, resonance and line distinctness."""
    tp = e if isinstance(e, ThetaParams) else ThetaParams(tuple(e))
    e0, et, e1, ei = tp.e
    prods = {}
    for st, s1, si in product((1, -1), repeat=3):
        key = f"e0 et^{st:+d} e1^{s1:+d} einf^{si:+d}"
        prods[key] = e0 * et ** st * e1 ** s1 * ei ** si
    smooth = all(abs(v - 1) > tol for v in prods.values())
    resonant = tuple(bool(abs(a - 2) <= tol or abs(a + 2) <= tol) for a in tp.a)
    distinct = not duplicate_lines(lines_24(tp), tol)
    tl = True
    for l in NAMES:
        vals = two_line_values(tp, l)
        tl &= all(abs(u - v) > tol * max(1.0, abs(u)) for u, v in combinations(vals, 2))
    return SmoothnessReport(prods, smooth, resonant, distinct, tl)


@dataclass(frozen=True)
class FiberClass:
    kind: str
    value: complex
    index: int
    lines: tuple = ()
    points: tuple = ()

    def to_json(self) -> dict:
        from .serialize import cjson

        return {
            "kind": self.kind, "plane": f"X{NAMES[self.index]}", "value": cjson(self.value),
            "lines": [ln.to_json() for ln in self.lines],
            "points": [[cjson(v) for v in p] for p in self.points],
        }


def _conic_matrix(a, c: complex, l: int) -> np.ndarray:
    """Symmetric 3x3 matrix of the conic ``F = 0`` inside the plane ``X_l = c``.

    Variables ``(X_i, X_j, 1)``: ``X_i**2 + X_j**2 + c X_i X_j - A_i X_i - A_j X_j + (c**2 - A_l c + Ainf)``.
    """
    A = a_to_A(a)
    Af = A.finite()
    i, j = _cyclic(l)
    const = c * c - Af[l] * c + A.Ainf
    return np.array([
        [1, c / 2, -Af[i] / 2],
        [c / 2, 1, -Af[j] / 2],
        [-Af[i] / 2, -Af[j] / 2, const],
    ], dtype=complex)


def classify_fiber(a, c: complex, l=0, tol: float = 1e-9, seed: int = 0) -> FiberClass:
    """Type of the fiber ``{X_l = c}``: ``Parabola`` (``c = +-2``), ``TwoLines`` (degenerate conic) or ``GenericConic``."""
    k = _idx(l)
    c = complex(c)
    tp = a if isinstance(a, ThetaParams) else ThetaParams.from_a(_as_a(a))
    av = tp.a
    if abs(c * c - 4) <= tol * max(1.0, abs(c) ** 2):
        return FiberClass("Parabola", c, k)
    m = _conic_matrix(av, c, k)
    det = complex(np.linalg.det(m))
    scale = max(1.0, float(np.max(np.abs(m))) ** 3)
    if abs(det) <= tol * scale:
        lines = tuple(ln for ln in lines_24(tp) if ln.k == k and abs(ln.const - c) <= 1e-7 * max(1.0, abs(c)))
        return FiberClass("TwoLines", c, k, lines)
    # two points over a random value of X_i: solve the quadratic in X_j
    rng = np.random.default_rng(seed)
    A = a_to_A(av)
    Af = A.finite()
    i, j = _cyclic(k)
    xi = complex(rng.normal(), rng.normal())
    b = c * xi - Af[j]
    cc = xi * xi - Af[i] * xi + c * c - Af[k] * c + A.Ainf
    r = cmath.sqrt(b * b - 4 * cc)
    pts = []
    for xj in ((-b + r) / 2, (-b - r) / 2):
        X = [0j, 0j, 0j]
        X[k], X[i], X[j] = c, xi, xj
        pts.append(tuple(X))
    return FiberClass("GenericConic", c, k, (), tuple(pts))


# ---------------------------------------------------------------------------
# rational parameterization of the X1-fibers


def jimbo_param(a, X1: complex, s: complex, tol: float = 1e-10) -> tuple[complex, complex]:
    """Point ``(X0, Xt)`` of the conic ``{X1 = const}`` with parameter ``s``.

    Write the quadratic part ``X0**2 + X1 X0 Xt + Xt**2 = (X0 - l1 Xt)(X0 - l2 Xt)``
    with ``l1 l2 = 1``, ``l1 + l2 = -X1``.  In ``u = X0 - l1 Xt``, ``v = X0 - l2 Xt``
    the conic reads ``(u + r)(v + p) = kappa``; the pencil of lines ``u = const``
    through a point at infinity sweeps it as ``u + r = s``, ``v + p = kappa/s``.

    Raises
    ------
    QDomainError
        If ``X1 = +-2`` (parabolic fiber) or the conic splits into two lines.
    """
    av = _as_a(a)
    X1 = complex(X1)
    s = complex(s)
    if s == 0:
        raise QDomainError("s must be nonzero")
    if abs(X1 * X1 - 4) <= tol * max(1.0, abs(X1) ** 2):
        raise QDomainError("X1 = +-2: parabolic fiber, excluded from the parameterization")
    l1, l2, den, cu, cv, kappa = _conic_uv(av, X1, tol)
    u = s - cv
    v = kappa / s - cu
    return (l2 * u - l1 * v) / den, (u - v) / den


def _conic_uv(av, X1: complex, tol: float):
    A = a_to_A(av)
    d = cmath.sqrt(X1 * X1 - 4)
    l1, l2 = (-X1 + d) / 2, (-X1 - d) / 2
    # X0 = (l2 u - l1 v)/(l2 - l1), Xt = (u - v)/(l2 - l1)
    den = l2 - l1
    # linear part -A0 X0 - At Xt in terms of u, v: coefficients of u and v
    cu = (-A.A0 * l2 - A.At) / den
    cv = (A.A0 * l1 + A.At) / den
    c0 = X1 * X1 - A.A1 * X1 + A.Ainf
    # u v + cu u + cv v + c0 = (u + cv)(v + cu) - (cu cv - c0)
    kappa = cu * cv - c0
    if abs(kappa) <= tol * max(1.0, abs(cu * cv), abs(c0)):
        raise QDomainError("X1 is a two-lines value: the conic is degenerate")
    return l1, l2, den, cu, cv, kappa


def jimbo_parameter_of(a, X, tol: float = 1e-10) -> complex:
    """Inverse of :func:`jimbo_param`: the ``s`` with ``jimbo_param(a, X1, s) = (X0, Xt)``."""
    av = _as_a(a)
    X0, Xt, X1 = (complex(v) for v in X)
    if abs(X1 * X1 - 4) <= tol * max(1.0, abs(X1) ** 2):
        raise QDomainError("X1 = +-2: parabolic fiber, excluded from the parameterization")
    l1, _, _, _, cv, _ = _conic_uv(av, X1, tol)
    return X0 - l1 * Xt + cv


def jimbo_d_coefficients(th, sigma1: complex) -> dict:
    """Coefficients of ``(X1**2 - 4) X0 = D0+ s + D0- / s + D00`` (and likewise ``Xt``).

    With ``a_l = 2 cos(pi theta_l)`` and ``X1 = 2 cos(pi sigma1)``:
    ``D0pm = 16 prod_eps sin(pi/2 (theta_t -+ sigma1 + eps theta_0)) sin(pi/2 (theta_1 -+ sigma1 + eps theta_inf))``,
    ``Dtpm = -D0pm exp(-+ i pi sigma1)``, ``D00 = X1 At - 2 A0``, ``Dt0 = X1 A0 - 2 At``.
    """
    t0, tt, t1, ti = (complex(v) for v in th)
    sg = complex(sigma1)
    a = tuple(2 * cmath.cos(math.pi * v) for v in (t0, tt, t1, ti))
    X1 = 2 * cmath.cos(math.pi * sg)
    A = a_to_A(a)

    def S(x):
        return cmath.sin(math.pi * x / 2)

    D = {}
    for pm, name in ((1, "+"), (-1, "-")):
        D[name] = 16 * S(tt - pm * sg + t0) * S(tt - pm * sg - t0) * S(t1 - pm * sg + ti) * S(t1 - pm * sg - ti)
    return {
        "D0+": D["+"], "D0-": D["-"], "D00": X1 * A.At - 2 * A.A0,
        "Dt+": -D["+"] * cmath.exp(-1j * math.pi * sg), "Dt-": -D["-"] * cmath.exp(1j * math.pi * sg),
        "Dt0": X1 * A.A0 - 2 * A.At, "X1": X1, "a": a,
    }


def jimbo_param_d(th, sigma1: complex, s: complex) -> tuple[complex, complex, complex]:
    """``(X0, Xt, X1)`` from the trigonometric coefficient formulas (cross-check route)."""
    D = jimbo_d_coefficients(th, sigma1)
    X1 = D["X1"]
    den = X1 * X1 - 4
    if abs(den) < 1e-12:
        raise QDomainError("X1 = +-2: parabolic fiber")
    s = complex(s)
    X0 = (D["D0+"] * s + D["D0-"] / s + D["D00"]) / den
    Xt = (D["Dt+"] * s + D["Dt-"] / s + D["Dt0"]) / den
    return X0, Xt, X1


def jimbo_cross_check(th, sigma1: complex, s: complex) -> float:
    """Distance between the trigonometric point and its conic-route regeneration.

    The point from :func:`jimbo_param_d` is mapped to its conic parameter and
    pushed back through :func:`jimbo_param`; both routes agree on the fiber.
    """
    X0, Xt, X1 = jimbo_param_d(th, sigma1, s)
    a = tuple(2 * cmath.cos(math.pi * complex(v)) for v in th)
    s2 = jimbo_parameter_of(a, (X0, Xt, X1))
    Y0, Yt = jimbo_param(a, X1, s2)
    return max(abs(X0 - Y0), abs(Xt - Yt)) / max(1.0, abs(X0), abs(Xt))


# ---------------------------------------------------------------------------
# dynamics


def involution(X, a, l) -> SurfacePoint:
    """``s_l``: swap the two roots of ``F`` as a monic quadratic in ``X_l``: ``X_l -> A_l - X_j X_k - X_l``."""
    k = _idx(l)
    i, j = _cyclic(k)
    X = [complex(v) for v in X]
    Af = a_to_A(a).finite()
    X[k] = Af[k] - X[i] * X[j] - X[k]
    return surface_point(tuple(X), a)


def orbit(X, a, n: int, word: Sequence = (0, "t")) -> list[tuple]:
    """``n`` iterates of ``g = s_{word[0]} o s_{word[1]} o ...`` starting from ``X`` (inclusive)."""
    pts = [tuple(complex(v) for v in X)]
    cur = pts[0]
    for _ in range(n - 1):
        for l in reversed(tuple(word)):
            cur = involution(cur, a, l).X
        pts.append(cur)
    return pts


def singular_point_search(a, starts: int = 10_000, seed: int = 0, tol: float = 1e-10,
                          max_iter: int = 40) -> list[tuple]:
    """Newton search for solutions of ``F = grad F = 0`` (probabilistic).

    The system is solved as the three gradient equations, with ``F = 0``
    checked afterwards; distinct hits are returned.
    """
    rng = np.random.default_rng(seed)
    A = a_to_A(a)
    Af = np.array(A.finite())
    X = rng.normal(size=(starts, 3)) * 2 + 1j * rng.normal(size=(starts, 3)) * 2
    for _ in range(max_iter):
        X0, Xt, X1 = X[:, 0], X[:, 1], X[:, 2]
        g = np.stack([Xt * X1 + 2 * X0 - Af[0], X0 * X1 + 2 * Xt - Af[1], X0 * Xt + 2 * X1 - Af[2]], axis=1)
        J = np.empty((starts, 3, 3), dtype=complex)
        J[:, 0] = np.stack([np.full(starts, 2.0), X1, Xt], axis=1)
        J[:, 1] = np.stack([X1, np.full(starts, 2.0), X0], axis=1)
        J[:, 2] = np.stack([Xt, X0, np.full(starts, 2.0)], axis=1)
        ok = np.abs(np.linalg.det(J)) > 1e-300
        step = np.zeros_like(X)
        step[ok] = np.linalg.solve(J[ok], g[ok][..., None])[..., 0]
        X = X - step
    hits = []
    for x in X:
        if not np.all(np.isfinite(x)):
            continue
        F, grad = fricke_eval(x, a)
        sc = _scale(x, A)
        if abs(F) <= tol * sc * 1e3 and max(abs(v) for v in grad) <= tol * sc * 1e3:
            if all(max(abs(x[m] - h[m]) for m in range(3)) > 1e-6 for h in hits):
                hits.append(tuple(complex(v) for v in x))
    return hits
