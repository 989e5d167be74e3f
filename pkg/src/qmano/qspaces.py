"""Solution spaces ``V_{k,a} = {f holomorphic on C* : f(qx) = a x**-k f(x)}``.

Every nonzero element factors as ``lambda * prod theta(x/alpha_i)`` with
``prod alpha_i = a`` exactly, and its zeros are the classes of ``-alpha_i``.
Elements are stored in that factored form (:class:`VElement`); sums of products
of theta factors and their Euler derivatives are handled by :class:`ThetaExpr`,
which can be refactored through :func:`find_zeros`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import AmbiguityError, QDomainError, RootFindingError, SpaceMismatchError
from .qcore import AnnulusPoint, QParam, annulus_rep, congruent, log_distance, theta, theta_D_all

__all__ = [
    "VElement",
    "VBasis",
    "ThetaExpr",
    "v_eval",
    "v_add",
    "v_scale",
    "v_mul_monomial",
    "find_zeros",
    "find_zeros_with_multiplicity",
    "refactor",
    "product_map",
    "quadric_coords",
    "quadric_factor",
    "quadric_preimages",
    "hyperplane_eval",
    "sample_points",
]


def sample_points(qp: QParam, n: int = 16, radius_exp: float = 0.37, phase: float = 0.1234):
    """Deterministic probe points on the circle ``|x| = |q|**radius_exp``."""
    r = abs(qp.q) ** radius_exp
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    return r * np.exp(1j * ang)


# ---------------------------------------------------------------------------
# expressions: linear combinations of products of (D^j theta)(x / alpha)


@dataclass(frozen=True)
class ThetaExpr:
    """Finite sum ``sum_t c_t prod_m (D^{j_m} theta)(x / alpha_m)`` with ``D = x d/dx``.

    ``k`` is the number of zeros per fundamental annulus and ``char`` the exact
    character ``c`` in ``f(qx) = c x**-k f(x)``; both are supplied by the caller
    and are what :func:`find_zeros` relies on.
    """

    qp: QParam
    k: int
    char: complex
    terms: tuple = ()

    @staticmethod
    def product(qp: QParam, roots: Sequence[complex], coef: complex = 1.0, orders=None):
        roots = tuple(complex(r) for r in roots)
        orders = tuple(orders) if orders is not None else (0,) * len(roots)
        char = complex(np.prod(roots)) if roots else 1.0
        return ThetaExpr(qp, len(roots), char, ((complex(coef), tuple(zip(roots, orders))),))

    def __add__(self, other: "ThetaExpr") -> "ThetaExpr":
        if other.k != self.k:
            raise SpaceMismatchError(f"degree mismatch {self.k} != {other.k}")
        return ThetaExpr(self.qp, self.k, self.char, self.terms + other.terms)

    def scaled(self, c: complex) -> "ThetaExpr":
        c = complex(c)
        return ThetaExpr(self.qp, self.k, self.char * 1.0, tuple((c * t[0], t[1]) for t in self.terms))

    def __mul__(self, other: "ThetaExpr") -> "ThetaExpr":
        terms = tuple(
            (c1 * c2, f1 + f2) for c1, f1 in self.terms for c2, f2 in other.terms
        )
        return ThetaExpr(self.qp, self.k + other.k, self.char * other.char, terms)

    def with_char(self, k: int, char: complex) -> "ThetaExpr":
        return replace(self, k=int(k), char=complex(char))

    def _factor_values(self, x, extra_order: int):
        need: dict = {}
        for _, factors in self.terms:
            for alpha, j in factors:
                need[alpha] = max(need.get(alpha, 0), j + extra_order)
        cache = {}
        for alpha, top in need.items():
            for jj, val in enumerate(theta_D_all(self.qp, x / alpha, top)):
                cache[(alpha, jj)] = np.asarray(val)
        return cache

    def value(self, x):
        x = np.asarray(x, dtype=complex)
        cache = self._factor_values(x, 0)
        out = np.zeros(x.shape, dtype=complex)
        for c, factors in self.terms:
            prod = np.full(x.shape, c, dtype=complex)
            for alpha, j in factors:
                prod = prod * cache[(alpha, j)]
            out = out + prod
        return out

    def magnitude(self, x):
        """``sum_t |c_t| prod |factor|``: the scale against which cancellation is measured."""
        x = np.asarray(x, dtype=complex)
        cache = self._factor_values(x, 0)
        out = np.zeros(x.shape)
        for c, factors in self.terms:
            prod = np.full(x.shape, abs(c))
            for alpha, j in factors:
                prod = prod * np.abs(cache[(alpha, j)])
            out = out + prod
        return out

    def xderiv(self, x):
        """``x f'(x)``, via the product rule on Euler derivatives."""
        x = np.asarray(x, dtype=complex)
        cache = self._factor_values(x, 1)
        out = np.zeros(x.shape, dtype=complex)
        for c, factors in self.terms:
            vals = [cache[(a, j)] for a, j in factors]
            for m, (alpha, j) in enumerate(factors):
                prod = np.full(x.shape, c, dtype=complex) * cache[(alpha, j + 1)]
                for n, v in enumerate(vals):
                    if n != m:
                        prod = prod * v
                out = out + prod
        return out

    def __call__(self, x):
        return self.value(x)


# ---------------------------------------------------------------------------
# factored elements


@dataclass(frozen=True)
class VElement:
    """Element ``scale * prod theta(x / roots[i])`` of ``V_{k, a}``.

    ``shift`` records the exact character: ``prod(roots) = a * q**shift``.  When
    ``scale == 0`` the element is zero and the roots only carry the space.
    """

    qp: QParam
    k: int
    a: complex
    scale: complex
    roots: tuple
    shift: int = 0
    coeffs: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "roots", tuple(complex(r) for r in self.roots))
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "scale", complex(self.scale))
        if self.k < 1 or len(self.roots) != self.k:
            raise QDomainError(f"need exactly k={self.k} roots, got {len(self.roots)}")
        if any(r == 0 for r in self.roots) or self.a == 0:
            raise QDomainError("roots and character must be nonzero")
        prod = complex(np.prod(self.roots))
        target = self.a * self.qp.q ** self.shift
        if abs(prod - target) > 1e-8 * abs(target):
            raise QDomainError(
                f"root product {prod} does not equal a*q^shift = {target}"
            )

    @classmethod
    def from_roots(cls, qp: QParam, roots: Sequence[complex], scale: complex = 1.0,
                   a: complex | None = None) -> "VElement":
        """Build from roots; ``a`` defaults to the exact root product (shift 0)."""
        roots = tuple(complex(r) for r in roots)
        prod = complex(np.prod(roots))
        if a is None:
            return cls(qp, len(roots), prod, scale, roots, 0)
        m = congruent(qp, prod, a)
        if m is None:
            raise SpaceMismatchError(f"root product {prod} is not congruent to a={a}")
        return cls(qp, len(roots), a, scale, roots, m)

    @classmethod
    def zero(cls, qp: QParam, k: int, a: complex) -> "VElement":
        a = complex(a)
        roots = (a,) + (1.0,) * (k - 1)
        return cls(qp, k, a, 0.0, roots, 0)

    @property
    def exact_char(self) -> complex:
        return self.a * self.qp.q ** self.shift

    @property
    def is_zero(self) -> bool:
        return self.scale == 0

    def zeros(self) -> list[AnnulusPoint]:
        """Zeros in ``C_q`` read off the factored form (classes of ``-alpha``)."""
        return [annulus_rep(self.qp, -r) for r in self.roots]

    def expr(self) -> ThetaExpr:
        e = ThetaExpr.product(self.qp, self.roots, self.scale)
        return e.with_char(self.k, self.exact_char)

    def __call__(self, x):
        return v_eval(self, x)

    def to_json(self) -> dict:
        from .serialize import cjson

        out = {
            "k": self.k,
            "a": cjson(self.a),
            "scale": cjson(self.scale),
            "roots": [cjson(r) for r in self.roots],
            "shift": int(self.shift),
        }
        if self.coeffs is not None:
            out["coeffs"] = [cjson(c) for c in self.coeffs]
        return out

    @classmethod
    def from_json(cls, qp: QParam, d: dict) -> "VElement":
        from .serialize import cparse

        coeffs = d.get("coeffs")
        return cls(
            qp,
            int(d["k"]),
            cparse(d["a"]),
            cparse(d["scale"]),
            tuple(cparse(r) for r in d["roots"]),
            int(d.get("shift", 0)),
            tuple(cparse(c) for c in coeffs) if coeffs is not None else None,
        )


def v_eval(f: VElement, x):
    """Evaluate ``f`` at ``x`` (scalar or array)."""
    xa = np.asarray(x, dtype=complex)
    if np.any(xa == 0):
        raise QDomainError("elements of V_{k,a} are only defined on C*")
    out = np.full(xa.shape, f.scale, dtype=complex)
    if f.scale != 0:
        for r in f.roots:
            out = out * np.asarray(theta(f.qp, xa / r))
    return complex(out) if np.ndim(x) == 0 else out


def v_scale(f: VElement, c: complex) -> VElement:
    coeffs = None if f.coeffs is None else tuple(c * x for x in f.coeffs)
    return replace(f, scale=f.scale * complex(c), coeffs=coeffs)


def v_mul_monomial(f: VElement, n: int) -> VElement:
    """Return ``x**n f`` in factored form (it lies in ``V_{k, a q**n}``).

    Uses ``x**n theta(x/alpha) = alpha**n q**(n(n+1)/2) theta(x / (q**n alpha))``.
    """
    if n == 0:
        return f
    q = f.qp.q
    alpha = f.roots[0]
    c = alpha ** n * q ** (n * (n + 1) // 2)
    roots = (alpha * q ** n,) + f.roots[1:]
    return VElement(f.qp, f.k, f.a, f.scale * c, roots, f.shift + n)


# ---------------------------------------------------------------------------
# canonical basis and coefficient form


class VBasis:
    """Basis ``theta(x / beta_j)**k`` (``beta_j**k = c``) of the space with exact character ``c``.

    Coefficients are obtained from the ``k x k`` interpolation system at probe
    angles on ``|x| = sqrt|q|``; ``condition`` reports its condition number.
    """

    def __init__(self, qp: QParam, k: int, char: complex):
        self.qp = qp
        self.k = int(k)
        self.char = complex(char)
        root = self.char ** (1.0 / self.k)
        self.betas = tuple(root * np.exp(2j * np.pi * j / self.k) for j in range(self.k))
        ang = 0.3183 + 2.0 * np.pi * (np.arange(self.k) + 0.5) / self.k
        self.probes = math.sqrt(abs(qp.q)) * np.exp(1j * ang)
        self.matrix = self.evaluate(self.probes)
        self.condition = float(np.linalg.cond(self.matrix))

    def evaluate(self, x) -> np.ndarray:
        """Matrix of basis values, shape ``x.shape + (k,)``."""
        x = np.asarray(x, dtype=complex)
        cols = [np.asarray(theta(self.qp, x / b)) ** self.k for b in self.betas]
        return np.stack(cols, axis=-1)

    def elements(self) -> list[VElement]:
        return [VElement(self.qp, self.k, self.char, 1.0, (b,) * self.k, 0) for b in self.betas]

    def coefficients(self, f) -> np.ndarray:
        vals = np.asarray(f(self.probes) if callable(f) else f, dtype=complex)
        return np.linalg.solve(self.matrix, vals)

    def combine(self, coeffs) -> ThetaExpr:
        coeffs = np.asarray(coeffs, dtype=complex)
        terms = tuple((complex(c), tuple((b, 0) for _ in range(self.k))) for c, b in zip(coeffs, self.betas))
        return ThetaExpr(self.qp, self.k, self.char, terms)


def _same_char(qp: QParam, f: VElement, g: VElement) -> bool:
    cf, cg = f.exact_char, g.exact_char
    return f.k == g.k and abs(cf - cg) <= 1e-9 * abs(cf)


def v_add(f: VElement, g: VElement) -> VElement:
    """Sum of two elements of the same space, in coefficient and refactored form.

    Raises
    ------
    SpaceMismatchError
        If the exact characters (or degrees) differ.
    RootFindingError
        If the sum cannot be refactored within tolerance.
    """
    if not _same_char(f.qp, f, g):
        raise SpaceMismatchError(
            f"cannot add elements of V_{{{f.k},{f.exact_char}}} and V_{{{g.k},{g.exact_char}}}"
        )
    if g.is_zero:
        return f
    if f.is_zero:
        return g
    basis = VBasis(f.qp, f.k, f.exact_char)
    cf, cg = basis.coefficients(f), basis.coefficients(g)
    coeffs = cf + cg
    probes = sample_points(f.qp, 16)
    fv, gv = np.asarray(v_eval(f, probes)), np.asarray(v_eval(g, probes))
    mag = max(np.max(np.abs(fv)), np.max(np.abs(gv)))
    if np.max(np.abs(fv + gv)) <= 1e-12 * mag:
        return replace(VElement.zero(f.qp, f.k, f.a), coeffs=tuple(np.zeros(f.k, complex)))
    expr = f.expr() + g.expr()
    out = refactor(expr, a=f.a)
    return replace(out, coeffs=tuple(complex(c) for c in coeffs))


# ---------------------------------------------------------------------------
# zero finding in the fundamental annulus

_GL_CACHE: dict = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


class _Counter:
    """Contour integrals of ``g'/g`` over rectangles in ``w = log x`` coordinates."""

    def __init__(self, fun):
        self.fun = fun
        self.evals = 0
        self.scale = 0.0

    def h(self, w):
        x = np.exp(w)
        val = self.fun.value(x)
        der = self.fun.xderiv(x)
        self.evals += w.size
        self.scale = max(self.scale, float(np.max(np.abs(val))))
        return der / val, val

    def moments(self, rect, p_max: int, center):
        u0, u1, p0, p1 = rect
        corners = [complex(u0, p0), complex(u1, p0), complex(u1, p1), complex(u0, p1)]
        out = np.zeros(p_max + 1, dtype=complex)
        min_abs = np.inf
        for a, b in zip(corners, corners[1:] + corners[:1]):
            length = abs(b - a)
            n = int(min(256, max(24, math.ceil(40.0 * length))))
            t, wts = _gl(n)
            w = 0.5 * (a + b) + 0.5 * (b - a) * t
            hv, val = self.h(w)
            min_abs = min(min_abs, float(np.min(np.abs(val))))
            dw = 0.5 * (b - a) * wts
            z = w - center
            zp = np.ones_like(z)
            for p in range(p_max + 1):
                out[p] += np.sum(zp * hv * dw)
                zp = zp * z
        return out / (2j * np.pi), min_abs

    def count(self, rect):
        m, _ = self.moments(rect, 0, 0.0)
        c = m[0]
        n = int(round(c.real))
        return n, abs(c - n)


def _noise_floor(fun, x):
    """Rounding level of ``fun`` at ``x``; sums with cancellation cannot resolve below it."""
    if hasattr(fun, "magnitude"):
        return 64 * np.finfo(float).eps * np.asarray(fun.magnitude(x))
    return np.zeros(np.shape(x))


def _newton(fun, x0: complex, max_iter: int = 60) -> tuple[complex, bool]:
    x = complex(x0)
    for _ in range(max_iter):
        val = complex(fun.value(np.array([x]))[0])
        if abs(val) <= float(_noise_floor(fun, np.array([x]))[0]) and _ > 0:
            return x, True
        der = complex(fun.xderiv(np.array([x]))[0])
        if der == 0:
            return x, False
        step = x * val / der
        x_new = x - step
        if not np.isfinite(x_new):
            return x, False
        if abs(step) <= 4e-16 * abs(x):
            return x_new, True
        x = x_new
    return x, abs(step) <= 1e-12 * abs(x)


def _roots_from_moments(m: np.ndarray, n: int, center: complex) -> np.ndarray:
    """Newton identities: power sums ``m[1..n]`` -> roots (shifted back by ``center``)."""
    e = np.zeros(n + 1, dtype=complex)
    e[0] = 1.0
    for p in range(1, n + 1):
        s = 0j
        for i in range(1, p + 1):
            s += (-1) ** (i - 1) * e[p - i] * m[i]
        e[p] = s / p
    coeffs = [(-1) ** p * e[p] for p in range(n + 1)]
    return np.roots(coeffs) + center


def _solve_rect(cnt: _Counter, fun, rect, n, depth, out, bad, hmax):
    if n == 0:
        return
    u0, u1, p0, p1 = rect
    wu, wp = u1 - u0, p1 - p0
    size = max(wu, wp)
    center = complex(0.5 * (u0 + u1), 0.5 * (p0 + p1))
    if (n == 1 and size <= hmax) or size < 1e-5 or depth > 40:
        mom, _ = cnt.moments(rect, n, center)
        est = _roots_from_moments(mom, n, center)
        if n == 1:
            x, ok = _newton(fun, np.exp(est[0]))
            w = np.log(x)
            if not ok or abs(w - est[0]) > 2 * size + 1e-6:
                x, ok = np.exp(est[0]), False
            out.append((complex(x), 1, ok))
            return
        # cluster of n zeros inside a tiny cell: report the mean with multiplicity
        wm = complex(np.mean(est))
        out.append((complex(np.exp(wm)), n, True))
        return
    for frac in (0.5, 0.46, 0.54, 0.41, 0.59, 0.37, 0.63):
        if wu >= wp:
            s = u0 + frac * wu
            a, b = (u0, s, p0, p1), (s, u1, p0, p1)
        else:
            s = p0 + frac * wp
            a, b = (u0, u1, p0, s), (u0, u1, s, p1)
        na, ra = cnt.count(a)
        nb, rb = cnt.count(b)
        if ra < 0.2 and rb < 0.2 and na >= 0 and nb >= 0 and na + nb == n:
            _solve_rect(cnt, fun, a, na, depth + 1, out, bad, hmax)
            _solve_rect(cnt, fun, b, nb, depth + 1, out, bad, hmax)
            return
    bad.append((rect, n))


def _as_fun(f):
    if isinstance(f, VElement):
        if f.is_zero:
            raise QDomainError("find_zeros: element is identically zero")
        return f.expr()
    if isinstance(f, ThetaExpr):
        return f
    if hasattr(f, "value") and hasattr(f, "xderiv") and hasattr(f, "k"):
        return f
    raise QDomainError("find_zeros needs a VElement, ThetaExpr or object with value/xderiv/k")


def _boundary_moments(fun, rect, p_max: int, center: complex, panel: float = 0.2, nodes: int = 20):
    """Composite Gauss-Legendre moments ``(1/2 pi i) oint (w - center)**p g'/g dw``."""
    u0, u1, p0, p1 = rect
    corners = [complex(u0, p0), complex(u1, p0), complex(u1, p1), complex(u0, p1)]
    t, wts = _gl(nodes)
    ws, dws = [], []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        npan = max(1, int(math.ceil(abs(b - a) / panel)))
        edges = a + (b - a) * np.arange(npan + 1) / npan
        for e0, e1 in zip(edges[:-1], edges[1:]):
            ws.append(0.5 * (e0 + e1) + 0.5 * (e1 - e0) * t)
            dws.append(0.5 * (e1 - e0) * wts)
    w = np.concatenate(ws)
    dw = np.concatenate(dws)
    x = np.exp(w)
    h = fun.xderiv(x) / fun.value(x)
    z = w - center
    out = np.array([np.sum(z ** p * h * dw) for p in range(p_max + 1)]) / (2j * np.pi)
    return out


def _product_ok(qp: QParam, fun, zeros, mult, tol: float = 1e-7) -> bool:
    prod = complex(np.prod([z ** m for z, m in zip(zeros, mult)]))
    target = (-1) ** fun.k * complex(fun.char)
    return congruent(QParam(qp.q, tol_cong=tol), prod, target) is not None


def _newton_many(fun, xs, max_iter: int = 40):
    """Simultaneous Newton iteration ``x <- x - x g/(x g')`` on an array of starts."""
    x = np.array(xs, dtype=complex)
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(max_iter):
        val = fun.value(x)
        der = fun.xderiv(x)
        done |= np.abs(val) <= _noise_floor(fun, x)
        if np.all(done):
            return x, True
        with np.errstate(all="ignore"):
            step = np.where(done, 0.0, x * val / der)
        if not np.all(np.isfinite(step)):
            return x, False
        x = x - step
        done |= np.abs(step) <= 1e-15 * np.abs(x)
        if np.all(done):
            return x, True
    return x, bool(np.all(np.abs(step) <= 1e-11 * np.abs(x)))


def _gap_center(vals, period: float) -> tuple[float, float]:
    """Midpoint of the widest gap of ``vals`` on a circle of length ``period``, and half its width."""
    v = np.sort(np.mod(vals, period))
    gaps = np.diff(np.concatenate([v, [v[0] + period]]))
    i = int(np.argmax(gaps))
    return float(v[i] + 0.5 * gaps[i]), float(0.5 * gaps[i])


def _placed_rect(qp: QParam, w_est):
    """Fundamental rectangle whose edges sit in the widest gaps between the estimated zeros."""
    L = abs(qp.log_abs_q)
    # in w = log x the q-action is w -> w + log q; work in the sheared coordinate
    # s = Re w / L so that each annulus class is one unit of s
    u = np.real(w_est)
    cu, du = _gap_center(u, L)
    # angles of representatives in the chosen annulus (u in (cu - L, cu])
    reps = [annulus_rep(qp, np.exp(w) / math.exp(cu)) for w in w_est]
    phis = np.array([np.angle(r.value) for r in reps])
    cp, dp = _gap_center(phis, 2 * np.pi)
    rect = (cu - L, cu, cp - 2 * np.pi, cp)
    return rect, min(du, dp)


def _fast_zeros(fun, rect, cong_tol: float = 1e-7):
    """Moment method on one fundamental rectangle; ``None`` when the configuration looks delicate."""
    qp = fun.qp
    k = int(fun.k)
    center = complex(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3]))
    mom = _boundary_moments(fun, rect, k, center, panel=0.3, nodes=16)
    if not np.all(np.isfinite(mom)) or abs(mom[0] - k) > 0.3:
        return None
    mom[0] = k
    est = _roots_from_moments(mom, k, center)
    rect2, dist = _placed_rect(qp, est)
    if dist < 1e-3:
        return None
    center2 = complex(0.5 * (rect2[0] + rect2[1]), 0.5 * (rect2[2] + rect2[3]))
    mom = _boundary_moments(fun, rect2, k, center2, panel=min(0.3, 1.6 * dist), nodes=20)
    if not np.all(np.isfinite(mom)) or abs(mom[0] - k) > 1e-3:
        return None
    mom[0] = k
    est = _roots_from_moments(mom, k, center2)
    if k > 1 and min(abs(a - b) for a, b in combinations(est, 2)) < 1e-3:
        return None
    xs, ok = _newton_many(fun, np.exp(est))
    if not ok or np.max(np.abs(xs / np.exp(est) - 1.0)) > 1e-4:
        return None
    for a, b in combinations(xs, 2):
        if log_distance(qp, a, b) < 1e-6:
            return None
    if not _product_ok(qp, fun, xs, [1] * k, cong_tol):
        return None
    return [(complex(x), 1) for x in xs]


def find_zeros_with_multiplicity(f, cong_tol: float = 1e-7) -> list[tuple[AnnulusPoint, int]]:
    """Zeros of a quasi-periodic function in ``C_q`` with their multiplicities.

    Works in ``w = log x`` on a rectangle covering one fundamental annulus.  The
    boundary moments of ``g'/g`` give the zero count (argument principle) and
    the power sums of the zeros, whose polynomial roots are polished by Newton's
    method.  When zeros crowd together or sit near the contour, the rectangle is
    split adaptively, counting each cell separately; irreducible clusters are
    reported as one zero of the cell's multiplicity.  The product of the zeros
    is always checked against the character, to relative accuracy ``cong_tol``
    (loosen it for sums with heavy cancellation, whose zeros are only
    determined to the rounding level divided by the derivative).
    """
    fun = _as_fun(f)
    qp = fun.qp
    k = int(fun.k)
    L = qp.log_abs_q
    offsets = ((0.0137, 0.0123), (0.237, 0.711), (0.61, 2.09), (0.83, 1.3))
    rects = [(L + cu * abs(L), cu * abs(L), cp - np.pi, cp + np.pi) for cu, cp in offsets]
    for rect in rects[:3]:
        fast = _fast_zeros(fun, rect, cong_tol)
        if fast is not None:
            return [(annulus_rep(qp, x), m) for x, m in fast]
    hmax = min(0.6 * abs(L), 1.0)
    attempts = []
    for rect in rects:
        cnt = _Counter(fun)
        n, res = cnt.count(rect)
        if res >= 0.2 or n != k:
            attempts.append((rect, n, res))
            continue
        out, bad = [], []
        _solve_rect(cnt, fun, rect, n, 0, out, bad, hmax)
        if bad or sum(m for _, m, _ in out) != k:
            attempts.append((rect, sum(m for _, m, _ in out), bad))
            continue
        if not all(ok for _, _, ok in out):
            attempts.append((rect, "newton", [x for x, _, ok in out if not ok]))
            continue
        if not _product_ok(qp, fun, [x for x, _, _ in out], [m for _, m, _ in out], cong_tol):
            attempts.append((rect, "product", [x for x, _, _ in out]))
            continue
        return [(annulus_rep(qp, x), m) for x, m, _ in out]
    raise RootFindingError(
        f"annulus zero count failed for degree {k}", cells=attempts,
        residuals=[a[2] for a in attempts],
    )


def find_zeros(f) -> list[AnnulusPoint]:
    """The ``k`` zeros (with multiplicity, repeated) of ``f`` in ``C_q``.

    For ``f = lambda prod theta(x/alpha_i)`` these are the classes of ``-alpha_i``;
    their product is congruent to ``(-1)**k a``.
    """
    out = []
    for p, m in find_zeros_with_multiplicity(f):
        out.extend([p] * m)
    return out


def refactor(f, a: complex | None = None, k: int | None = None, char: complex | None = None,
             tol: float = 1e-8, cong_tol: float = 1e-7) -> VElement:
    """Refit a quasi-periodic function into factored form ``lambda prod theta(x/alpha)``.

    The roots are adjusted along their q-spirals so that their product equals the
    exact character; ``a`` (default: that character) fixes the nominal space.
    ``cong_tol`` bounds the mismatch of the raw zero product; the value
    residual of the fit (``tol``) is the actual acceptance test.
    """
    fun = _as_fun(f)
    qp = fun.qp
    k = fun.k if k is None else k
    c = complex(fun.char if char is None else char)
    zeros = []
    for p, m in find_zeros_with_multiplicity(fun, cong_tol):
        zeros.extend([p] * m)
    alphas = [-z.value for z in zeros]
    prod = complex(np.prod(alphas))
    if log_distance(qp, prod, c) > max(cong_tol, qp.tol_cong):
        raise RootFindingError(
            f"zero product {prod} is not congruent to (-1)^k * {c}",
            residuals=[abs(annulus_rep(qp, prod).value - annulus_rep(qp, c).value)],
        )
    alphas[-1] = c / complex(np.prod(alphas[:-1])) if k > 1 else c
    pts = sample_points(qp, 16)
    target = np.asarray(fun.value(pts))
    basis = np.ones_like(pts)
    for r in alphas:
        basis = basis * np.asarray(theta(qp, pts / r))
    lam = complex(np.vdot(basis, target) / np.vdot(basis, basis))
    resid = float(np.max(np.abs(lam * basis - target)) / max(np.max(np.abs(target)), 1e-300))
    if resid > tol:
        raise RootFindingError(f"refactoring residual {resid:.2e} exceeds {tol:.0e}", residuals=[resid])
    nominal = c if a is None else complex(a)
    return VElement.from_roots(qp, alphas, lam, nominal)


# ---------------------------------------------------------------------------
# products, quadric structure, hyperplanes


def product_map(f: VElement, g: VElement) -> VElement:
    """``p_{a,b}(f, g) = f g`` from ``V_{2,a} x V_{2,b}`` to ``V_{4,ab}``."""
    if f.k != 2 or g.k != 2:
        raise QDomainError("product_map is defined on degree-2 spaces")
    a = f.a * g.a
    if f.is_zero or g.is_zero:
        return VElement(f.qp, 4, a, 0.0, f.roots + g.roots, f.shift + g.shift)
    return VElement(f.qp, 4, a, f.scale * g.scale, f.roots + g.roots, f.shift + g.shift)


def _quadric_basis(qp: QParam, a_exact: complex, b_exact: complex):
    al = np.sqrt(complex(a_exact))
    be = np.sqrt(complex(b_exact))
    u = [(al, al), (-al, -al)]
    v = [(be, be), (-be, -be)]
    return [ui + vj for ui in u for vj in v]


def _coord_probes(qp: QParam) -> np.ndarray:
    n = 16
    ang = 0.2718 + 2 * np.pi * np.arange(n) / n
    r1, r2 = abs(qp.q) ** 0.3, abs(qp.q) ** 0.7
    return np.concatenate([r1 * np.exp(1j * ang), r2 * np.exp(1j * (ang + np.pi / n))])


def quadric_coords(h, a_exact: complex, b_exact: complex) -> np.ndarray:
    """Coordinates ``(X, Y, Z, T)`` of ``h`` in the basis ``(u1 v1, u1 v2, u2 v1, u2 v2)``.

    Here ``u1 = theta(x/alpha)**2``, ``u2 = theta(-x/alpha)**2`` with
    ``alpha**2 = a`` and similarly ``v`` for ``b``; the image of the product map
    is the quadric ``X T - Y Z = 0``.  The fit is row-weighted and column-scaled
    because theta products vary over many orders of magnitude on a circle.
    """
    qp = h.qp
    fun = h.expr() if isinstance(h, VElement) else h
    roots = _quadric_basis(qp, a_exact, b_exact)
    probes = _coord_probes(qp)
    mat = np.stack(
        [np.prod([np.asarray(theta(qp, probes / r)) for r in rr], axis=0) for rr in roots], axis=-1
    )
    vals = np.asarray(fun.value(probes))
    w = 1.0 / np.linalg.norm(mat, axis=1)
    A = mat * w[:, None]
    col = np.linalg.norm(A, axis=0)
    coords, *_ = np.linalg.lstsq(A / col, vals * w, rcond=None)
    return coords / col


def quadric_preimages(h: VElement, a: complex, b: complex) -> list[tuple[VElement, VElement]]:
    """All splittings of ``h`` as ``f g`` with ``f`` in ``V_{2,a}``, ``g`` in ``V_{2,b}``.

    Each returned pair has ``f.scale == 1``.  Distinct pairs differ by the zero
    split; when ``a`` and ``b`` are congruent both orders of a split appear.
    """
    if h.is_zero:
        raise QDomainError("quadric_factor needs a nonzero element")
    qp = h.qp
    a = complex(a)
    c_exact = h.exact_char
    b_exact = c_exact / a
    if congruent(qp, a * complex(b), c_exact) is None:
        raise SpaceMismatchError("a*b is not congruent to the character of h")
    zs = [z.value for z in find_zeros(h)]
    found = []
    seen = []
    for pair in combinations(range(4), 2):
        rest = [i for i in range(4) if i not in pair]
        pa = zs[pair[0]] * zs[pair[1]]
        pb = zs[rest[0]] * zs[rest[1]]
        if congruent(qp, pa, a) is None or congruent(qp, pb, b_exact) is None:
            continue
        key = sorted((annulus_rep(qp, zs[i]).value for i in pair), key=lambda c: (c.real, c.imag))
        key = tuple(np.round(np.array(key), 7))
        if key in seen:
            continue
        seen.append(key)
        fa = [-zs[pair[0]], a / -zs[pair[0]]]
        gb = [-zs[rest[0]], b_exact / -zs[rest[0]]]
        f = VElement.from_roots(qp, fa, 1.0, a)
        g0 = VElement.from_roots(qp, gb, 1.0, complex(b))
        pts = sample_points(qp, 12)
        fg = np.asarray(v_eval(f, pts)) * np.asarray(v_eval(g0, pts))
        hv = np.asarray(v_eval(h, pts))
        lam = complex(np.vdot(fg, hv) / np.vdot(fg, fg))
        found.append((f, v_scale(g0, lam)))
    return found


def quadric_factor(h: VElement, a: complex, b: complex):
    """Factor ``h`` through the product map ``p_{a,b}``; ``None`` if not in its image.

    The factors are unique up to ``(f, g) -> (f/l, l g)``; the returned ``f`` has
    scale 1.  If ``a`` and ``b`` are congruent a second (swapped) preimage exists;
    the one whose ``f`` zeros come first in lexicographic order is returned.

    Raises
    ------
    AmbiguityError
        If two unrelated splits both match within tolerance.
    """
    pre = quadric_preimages(h, a, b)
    if not pre:
        return None
    if len(pre) > 1 and congruent(h.qp, a, b) is None:
        raise AmbiguityError("several zero splits match", candidates=pre)
    return pre[0]


def hyperplane_eval(x0: complex, f: VElement) -> complex:
    """Value ``f(x0)``; ``f`` lies in the hyperplane ``H_{x0}`` iff it vanishes.

    ``H_{q x0} = H_{x0}`` because ``f(q x0) = c x0**-k f(x0)``.
    """
    return v_eval(f, complex(x0))
