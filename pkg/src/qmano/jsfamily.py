"""Local data, monodromy matrices and their projective invariants.

A monodromy matrix is a 2x2 matrix ``M`` of theta-type functions with
``M(qx) = R M(x) (S x)**-1``, ``R = Diag(rho)``, ``S = Diag(sigma)``, whose
determinant vanishes exactly on the four q-spirals ``[x_i; q]``.  Since
``M(x_i)`` then has rank one, its nonzero column ``(f_i, g_i)`` and nonzero row
``(u_i, v_i)`` are well defined up to scale, giving the gauge invariants
``Pi_ij = (f_i g_j : f_j g_i)`` and ``Pi'_ij = (u_i v_j : u_j v_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import (
    InconsistencyError,
    MembershipError,
    QDomainError,
    SpaceMismatchError,
    TangencyError,
    AmbiguityError,
)
from .projective import ProjectivePoint
from .qcore import AnnulusPoint, QParam, annulus_rep, congruent, log_distance, theta
from .qspaces import (
    ThetaExpr,
    VElement,
    quadric_coords,
    quadric_factor,
    refactor,
    v_eval,
    v_mul_monomial,
    v_scale,
)

__all__ = [
    "LocalData",
    "ValidityReport",
    "MonodromyMatrix",
    "GaugePair",
    "PAIRS",
    "complement",
    "validate",
    "det_profile",
    "det_scale",
    "nonzero_column",
    "nonzero_row",
    "pi_invariant",
    "pi_prime",
    "reducible",
    "line_membership",
    "lines_containing",
    "gauge_apply",
    "transpose",
    "generate_quadric",
    "QuadricGeneration",
]

PAIRS = tuple(combinations(range(1, 5), 2))
RANK_TOL = 1e-8
LINE_TOL = 1e-8
DISTINCT_TOL = 1e-8


def complement(pair: Sequence[int]) -> tuple[int, int]:
    i, j = pair
    rest = tuple(k for k in range(1, 5) if k not in (i, j))
    return rest  # type: ignore[return-value]


@dataclass(frozen=True)
class LocalData:
    """Exponents ``rho`` at 0, ``sigma`` at infinity and the singularities ``xs`` (1-based access)."""

    qp: QParam
    rho: tuple
    sigma: tuple
    xs: tuple

    def __post_init__(self):
        for name, n in (("rho", 2), ("sigma", 2), ("xs", 4)):
            vals = tuple(complex(v) for v in getattr(self, name))
            if len(vals) != n:
                raise QDomainError(f"{name} needs {n} entries, got {len(vals)}")
            if any(v == 0 for v in vals):
                raise QDomainError(f"{name} entries must be nonzero")
            object.__setattr__(self, name, vals)

    def x(self, i: int) -> complex:
        return self.xs[i - 1]

    def r(self, h: int) -> complex:
        return self.rho[h - 1]

    def s(self, h: int) -> complex:
        return self.sigma[h - 1]

    @property
    def w_char(self) -> complex:
        """``rho1 rho2 / (sigma1 sigma2)``, the character of ``det M``."""
        return self.rho[0] * self.rho[1] / (self.sigma[0] * self.sigma[1])

    @property
    def x_product(self) -> complex:
        return complex(np.prod(self.xs))

    @property
    def fr_shift(self) -> int | None:
        """``m`` with ``x1 x2 x3 x4 = rho1 rho2/(sigma1 sigma2) q**m``, or ``None`` if (FR) fails."""
        return congruent(self.qp, self.x_product, self.w_char)

    def a_pair(self, pair) -> complex:
        i, j = pair
        return self.rho[0] * self.rho[1] / (self.x(i) * self.x(j))

    def det_polynomial(self) -> VElement:
        """``prod theta(-x/x_i)`` shifted by a monomial so its character is exactly ``w_char``."""
        u = VElement.from_roots(self.qp, [-x for x in self.xs])
        m = self.fr_shift
        if m is None:
            raise InconsistencyError("Fuchs relation fails for these local data")
        # x**-m prod theta(-x/x_i) has character x1x2x3x4 q**-m = w_char
        return v_mul_monomial(u, -m) if m else u

    def to_json(self) -> dict:
        from .serialize import cjson

        return {
            "q": cjson(self.qp.q),
            "rho": [cjson(v) for v in self.rho],
            "sigma": [cjson(v) for v in self.sigma],
            "xs": [cjson(v) for v in self.xs],
        }

    @classmethod
    def from_json(cls, d: dict, tol_eq: float | None = None) -> "LocalData":
        from .serialize import cparse

        try:
            q = cparse(d["q"])
            qp = QParam(q) if tol_eq is None else QParam(q, tol_eq=tol_eq)
            return cls(qp, tuple(cparse(v) for v in d["rho"]),
                       tuple(cparse(v) for v in d["sigma"]), tuple(cparse(v) for v in d["xs"]))
        except (KeyError, TypeError) as exc:
            raise QDomainError(f"malformed local data: {exc}") from exc


@dataclass
class ValidityReport:
    fr: bool
    fr_shift: int | None
    nr: bool
    nr_failures: list
    ns: dict
    hyp8: dict
    hyp48: bool
    splittings: list
    has_splitting: bool

    @property
    def ok(self) -> bool:
        return self.fr and self.nr

    def to_json(self) -> dict:
        key = lambda p: f"{p[0]}{p[1]}"  # noqa: E731
        return {
            "FR": self.fr,
            "FR_shift": self.fr_shift,
            "NR": self.nr,
            "NR_failures": self.nr_failures,
            "NS": {key(p): v for p, v in self.ns.items()},
            "Hyp8": {key(p): v for p, v in self.hyp8.items()},
            "Hyp48": self.hyp48,
            "splitting": self.has_splitting,
            "splittings": [
                {"pair": list(s[0]), "rho": s[1], "sigma": s[2]} for s in self.splittings
            ],
        }


def _special_sets(local: LocalData, pair):
    i, j = pair
    k, l = complement(pair)
    qp = local.qp
    xp = [annulus_rep(qp, -local.r(h) / local.x(m)).value for m in (i, j) for h in (1, 2)]
    xpp = [annulus_rep(qp, -local.s(h) * local.x(m)).value for m in (k, l) for h in (1, 2)]
    return xp, xpp


def _hyp8(local: LocalData, pair) -> bool:
    xp, xpp = _special_sets(local, pair)
    pts = xp + xpp
    return all(log_distance(local.qp, a, b) > DISTINCT_TOL for a, b in combinations(pts, 2))


def validate(local: LocalData) -> ValidityReport:
    """Check (FR), (NR), per-pair non-splitting and the eight-distinct-values hypothesis."""
    qp = local.qp
    m = local.fr_shift
    fr = m is not None
    failures = []
    if congruent(qp, local.rho[0] / local.rho[1], 1.0) is not None:
        failures.append("rho1/rho2")
    if congruent(qp, local.sigma[0] / local.sigma[1], 1.0) is not None:
        failures.append("sigma1/sigma2")
    for k, l in PAIRS:
        if congruent(qp, local.x(k) / local.x(l), 1.0) is not None:
            failures.append(f"x{k}/x{l}")
    ns, hyp8 = {}, {}
    splittings = []
    for pair in PAIRS:
        i, j = pair
        prod = local.x(i) * local.x(j)
        hits = [
            (r, c) for r in (1, 2) for c in (1, 2)
            if congruent(qp, local.r(r) / local.s(c), prod) is not None
        ]
        ns[pair] = not hits
        hyp8[pair] = _hyp8(local, pair)
        k, l = complement(pair)
        for r, c in hits:
            if r != c:
                other = local.r(c) / local.s(r)
                if congruent(qp, local.x(k) * local.x(l), other) is not None:
                    splittings.append((pair, r, c))
    return ValidityReport(
        fr=fr, fr_shift=m, nr=not failures, nr_failures=failures, ns=ns, hyp8=hyp8,
        hyp48=all(hyp8.values()), splittings=splittings, has_splitting=bool(splittings),
    )


@dataclass(frozen=True)
class MonodromyMatrix:
    """``M = [[m11, m12], [m21, m22]]`` with ``m_rc`` in ``V_{2, rho_r/sigma_c}``."""

    local: LocalData
    m11: VElement
    m12: VElement
    m21: VElement
    m22: VElement

    def entry(self, r: int, c: int) -> VElement:
        return getattr(self, f"m{r}{c}")

    @property
    def entries(self):
        return (self.m11, self.m12, self.m21, self.m22)

    def __call__(self, x) -> np.ndarray:
        """Values ``M(x)``, shape ``x.shape + (2, 2)``."""
        x = np.asarray(x, dtype=complex)
        vals = [np.asarray(v_eval(e, x)) for e in self.entries]
        return np.stack(vals, axis=-1).reshape(x.shape + (2, 2))

    def det(self, x):
        m = self(x)
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]

    def to_json(self) -> dict:
        out = {"local": self.local.to_json()}
        for r in (1, 2):
            for c in (1, 2):
                out[f"m{r}{c}"] = self.entry(r, c).to_json()
        return out

    @classmethod
    def from_json(cls, d: dict, local: LocalData | None = None) -> "MonodromyMatrix":
        local = local or LocalData.from_json(d["local"])
        try:
            ents = [VElement.from_json(local.qp, d[f"m{r}{c}"]) for r in (1, 2) for c in (1, 2)]
        except KeyError as exc:
            raise QDomainError(f"missing matrix entry {exc}") from exc
        return cls(local, *ents)


@dataclass(frozen=True)
class GaugePair:
    gamma: tuple
    delta: tuple

    def __post_init__(self):
        for name in ("gamma", "delta"):
            vals = tuple(complex(v) for v in getattr(self, name))
            if len(vals) != 2 or any(v == 0 for v in vals):
                raise QDomainError(f"gauge {name} needs two nonzero entries")
            object.__setattr__(self, name, vals)


def _probe_points(local: LocalData, n: int = 16) -> np.ndarray:
    """Sample points on ``|x| = |q|**0.37`` at irrational angles, avoiding the spirals of ``xs``."""
    qp = local.qp
    r = abs(qp.q) ** 0.37
    pts = []
    t = 0.5772
    while len(pts) < n:
        x = r * np.exp(1j * t)
        if all(log_distance(qp, x, -xi) > 0.05 for xi in local.xs):
            pts.append(x)
        t += 2 * np.pi * 0.6180339887
    return np.array(pts)


def det_scale(M: MonodromyMatrix, x) -> np.ndarray:
    """``|m11 m22| + |m12 m21|``: the size of the two products whose difference is ``det M``."""
    m = M(np.asarray(x))
    return np.abs(m[..., 0, 0] * m[..., 1, 1]) + np.abs(m[..., 0, 1] * m[..., 1, 0])


def det_profile(M: MonodromyMatrix, tol: float = 1e-7, raise_on_fail: bool = True):
    """Fit ``det M = C x**n prod theta(-x/x_i)`` at 16 points; return ``(C, residual)``.

    The residual is measured against ``|m11 m22| + |m12 m21|`` rather than
    ``|det M|``: it is the relative perturbation of the entries needed to
    restore the identity.  For clustered real data ``det M`` can sit ten or
    more orders below the entry products, where a ratio against ``|det M|``
    would only measure rounding.

    ``n`` is forced by the characters (``n = 0`` whenever the entries have
    exact characters ``rho_r/sigma_c`` and ``x1x2x3x4 = rho1rho2/(sigma1sigma2)``).

    Raises
    ------
    MembershipError
        If ``det M`` vanishes identically or the relative residual exceeds ``tol``.
    """
    local = M.local
    qp = local.qp
    c11 = M.m11.exact_char * M.m22.exact_char
    c12 = M.m12.exact_char * M.m21.exact_char
    zero11 = M.m11.is_zero or M.m22.is_zero
    zero12 = M.m12.is_zero or M.m21.is_zero
    if zero11 and zero12:
        raise MembershipError("det M vanishes identically")
    if not zero11 and not zero12 and abs(c11 - c12) > 1e-9 * abs(c11):
        raise SpaceMismatchError("entries have incompatible exact characters")
    char = c12 if zero11 else c11
    n = congruent(qp, char, local.x_product)
    if n is None:
        raise MembershipError("det M and prod theta(-x/x_i) have non-congruent characters")
    xs = _probe_points(local, 16)
    d = np.asarray(M.det(xs))
    u = np.prod([np.asarray(theta(qp, -xs / xi)) for xi in local.xs], axis=0) * xs ** n
    C = complex(np.vdot(u, d) / np.vdot(u, u))
    if np.max(np.abs(d)) == 0:
        raise MembershipError("det M vanishes identically")
    resid = float(np.max(np.abs(d - C * u)) / np.max(det_scale(M, xs)))
    if raise_on_fail and resid > tol:
        raise MembershipError(f"det M is not proportional to prod theta(-x/x_i): residual {resid:.2e}",
                              constant=C, residual=resid)
    return C, resid


def _rank_one(M: MonodromyMatrix, i: int) -> np.ndarray:
    m = M(np.asarray(M.local.x(i)))
    nrm = np.linalg.norm(m)
    if nrm == 0:
        raise InconsistencyError(f"M(x_{i}) = 0, so det M would have a multiple zero")
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det) > RANK_TOL * nrm ** 2:
        raise InconsistencyError(f"M(x_{i}) is not of rank one (|det| = {abs(det):.2e})")
    return m


def nonzero_column(M: MonodromyMatrix, i: int, which: int | None = None):
    """Nonzero column ``(f_i, g_i)`` of ``M(x_i)``: the larger one (ties go to column 1)."""
    m = _rank_one(M, i)
    n1, n2 = np.linalg.norm(m[:, 0]), np.linalg.norm(m[:, 1])
    if which is None:
        which = 1 if n1 >= n2 * (1 - 1e-12) else 2
    col = m[:, which - 1]
    if np.linalg.norm(col) <= LINE_TOL * np.linalg.norm(m):
        raise AmbiguityError(f"column {which} of M(x_{i}) is null")
    return complex(col[0]), complex(col[1])


def nonzero_row(M: MonodromyMatrix, i: int, which: int | None = None):
    """Nonzero row ``(u_i, v_i)`` of ``M(x_i)``, same selection rule as columns."""
    m = _rank_one(M, i)
    n1, n2 = np.linalg.norm(m[0, :]), np.linalg.norm(m[1, :])
    if which is None:
        which = 1 if n1 >= n2 * (1 - 1e-12) else 2
    row = m[which - 1, :]
    if np.linalg.norm(row) <= LINE_TOL * np.linalg.norm(m):
        raise AmbiguityError(f"row {which} of M(x_{i}) is null")
    return complex(row[0]), complex(row[1])


def _cross_ratio_point(a, b) -> ProjectivePoint:
    (fi, gi), (fj, gj) = a, b
    num, den = fi * gj, fj * gi
    ref = max(abs(fi), abs(gi)) * max(abs(fj), abs(gj))
    if max(abs(num), abs(den)) <= 1e-12 * ref:
        raise AmbiguityError("both components of the invariant vanish", candidates=[num, den])
    return ProjectivePoint.from_pair(num, den)


def pi_invariant(M: MonodromyMatrix, i: int, j: int, columns=(None, None)) -> ProjectivePoint:
    """``Pi_ij(M) = (f_i g_j : f_j g_i)`` from nonzero columns of ``M(x_i)``, ``M(x_j)``."""
    if i == j:
        raise QDomainError("pi_invariant needs two distinct indices")
    return _cross_ratio_point(nonzero_column(M, i, columns[0]), nonzero_column(M, j, columns[1]))


def pi_prime(M: MonodromyMatrix, i: int, j: int, rows=(None, None)) -> ProjectivePoint:
    """``Pi'_ij(M) = (u_i v_j : u_j v_i)`` from nonzero rows of ``M(x_i)``, ``M(x_j)``."""
    if i == j:
        raise QDomainError("pi_prime needs two distinct indices")
    return _cross_ratio_point(nonzero_row(M, i, rows[0]), nonzero_row(M, j, rows[1]))


def _entry_is_zero(M: MonodromyMatrix, e: VElement, probes) -> bool:
    if e.is_zero:
        return True
    ref = max(np.max(np.abs(v_eval(f, probes))) for f in M.entries if not f.is_zero)
    return bool(np.max(np.abs(v_eval(e, probes))) <= 1e-12 * ref)


def reducible(M: MonodromyMatrix):
    """``(True, [(r, c), ...])`` when some entry vanishes identically."""
    probes = _probe_points(M.local, 8)
    which = [(r, c) for r in (1, 2) for c in (1, 2) if _entry_is_zero(M, M.entry(r, c), probes)]
    return bool(which), which


def line_membership(M: MonodromyMatrix, kind: str, h: int, i: int, tol: float = LINE_TOL) -> bool:
    """Is ``M`` on ``L_{rho_h, x_i}`` (row ``h`` of ``M(x_i)`` null) or ``L_{sigma_h, x_i}`` (column ``h`` null)?"""
    m = M(np.asarray(M.local.x(i)))
    nrm = np.linalg.norm(m)
    if kind == "rho":
        part = m[h - 1, :]
    elif kind == "sigma":
        part = m[:, h - 1]
    else:
        raise QDomainError("kind must be 'rho' or 'sigma'")
    return bool(np.linalg.norm(part) <= tol * nrm)


def lines_containing(M: MonodromyMatrix, tol: float = LINE_TOL) -> list[tuple[str, int, int]]:
    """All 16 special lines ``(kind, h, i)`` containing ``M``."""
    return [
        (kind, h, i)
        for kind in ("rho", "sigma") for h in (1, 2) for i in range(1, 5)
        if line_membership(M, kind, h, i, tol)
    ]


def gauge_apply(M: MonodromyMatrix, g: GaugePair) -> MonodromyMatrix:
    """Left action ``Gamma M Delta**-1``: ``m_rc <- (gamma_r / delta_c) m_rc``."""
    ents = {}
    for r in (1, 2):
        for c in (1, 2):
            ents[f"m{r}{c}"] = v_scale(M.entry(r, c), g.gamma[r - 1] / g.delta[c - 1])
    return MonodromyMatrix(M.local, **ents)


def transpose(M: MonodromyMatrix) -> MonodromyMatrix:
    """``M^t`` as a matrix for the local data with ``rho`` and ``sigma`` exchanged.

    ``M^t(qx) = S^-1 M^t(x) R x^-1``, so it is a monodromy matrix for
    ``rho' = 1/sigma``, ``sigma' = 1/rho``; invariants transform accordingly.
    """
    L = M.local
    local_t = LocalData(L.qp, (1 / L.sigma[0], 1 / L.sigma[1]), (1 / L.rho[0], 1 / L.rho[1]), L.xs)
    return MonodromyMatrix(local_t, M.m11, M.m21, M.m12, M.m22)


# ---------------------------------------------------------------------------
# the quadric generator


@dataclass
class QuadricGeneration:
    matrix: MonodromyMatrix | None
    lam: complex | None
    roots: tuple
    tangent: bool
    f1: tuple = field(default=())


def _quadric_form(v: np.ndarray) -> complex:
    X, Y, Z, T = v
    return X * T - Y * Z


def _random_factor(qp: QParam, rng: np.random.Generator, char: complex) -> VElement:
    alpha = complex(np.exp(rng.uniform(-0.9, 0.9) * abs(qp.log_abs_q) + 1j * rng.uniform(-np.pi, np.pi)))
    scale = complex(np.exp(rng.normal(scale=0.3) + 1j * rng.uniform(-np.pi, np.pi)))
    return VElement(qp, 2, char, scale, (alpha, char / alpha), 0)


def generate_quadric_detailed(local: LocalData, f1_seed: int | None = None, *, factors=None,
                              root_index: int = 0) -> QuadricGeneration:
    """Build ``M`` from ``f1 = m11 m22`` by intersecting ``f1 + C u`` with the quadric of ``m12 m21``.

    ``u = prod theta(-x/x_i)`` (up to the monomial making its character exact).
    The condition ``f1 - lam u = m12 m21`` is quadratic in ``lam``; its two roots
    give the two intersection points, a double root meaning tangency.
    """
    qp = local.qp
    r1, r2 = local.rho
    s1, s2 = local.sigma
    if factors is None:
        rng = np.random.default_rng(f1_seed)
        m11 = _random_factor(qp, rng, r1 / s1)
        m22 = _random_factor(qp, rng, r2 / s2)
    else:
        m11, m22 = factors
    u = local.det_polynomial()
    a2, b2 = r1 / s2, r2 / s1
    f1e = m11.expr() * m22.expr()
    f1e = f1e.with_char(4, local.w_char)
    ue = u.expr()
    cf = quadric_coords(f1e, a2, b2)
    cu = quadric_coords(ue, a2, b2)
    # Q(cf - lam cu) = Q(cf) - lam B + lam^2 Q(cu)
    c0 = _quadric_form(cf)
    c2 = _quadric_form(cu)
    X, Y, Z, T = cf
    Xu, Yu, Zu, Tu = cu
    c1 = -(X * Tu + Xu * T - Y * Zu - Yu * Z)
    scale = max(abs(c0), abs(c1), abs(c2))
    roots = tuple(complex(r) for r in np.roots([c2, c1, c0])) if abs(c2) > 1e-14 * scale else (
        (complex(-c0 / c1),) if abs(c1) > 0 else ())
    disc = c1 * c1 - 4 * c0 * c2
    tangent = len(roots) == 2 and abs(disc) <= 1e-10 * max(abs(c1) ** 2, abs(4 * c0 * c2))
    admissible = [lam for lam in roots if abs(lam) > 1e-10 * (abs(c1) / max(abs(c2), 1e-300) + 1)]
    # a large lam pushes the zeros of f1 - lam u onto the x_i, where factoring loses digits
    admissible.sort(key=abs)
    if tangent:
        lam = complex(np.mean(roots))
        raise TangencyError("f1 + C u is tangent to the quadric (double root)", root=lam)
    if not admissible:
        return QuadricGeneration(None, None, roots, False, (m11, m22))
    lam = admissible[min(root_index, len(admissible) - 1)]
    lam = _polish_lambda(local, f1e, ue, lam, a2)
    f2 = f1e + ue.scaled(-lam)
    h = refactor(f2, a=local.w_char)
    fac = quadric_factor(h, a2, b2)
    if fac is None:
        return QuadricGeneration(None, lam, roots, False, (m11, m22))
    m12, m21 = fac
    M = MonodromyMatrix(local, m11, m12, m21, m22)
    return QuadricGeneration(M, lam, roots, False, (m11, m22))


def _polish_lambda(local: LocalData, f1e: ThetaExpr, ue: ThetaExpr, lam: complex, a2: complex) -> complex:
    """Refine ``lam`` so that two zeros of ``f1 - lam u`` multiply exactly to a lift of ``a2``.

    The coordinate quadratic can be ill-conditioned; with ``lam = f1(z)/u(z)`` the
    condition becomes ``H(z) = f1(a'/z) u(z) - f1(z) u(a'/z) = 0``, solved by a
    secant iteration from the approximate zero.
    """
    from .qspaces import find_zeros

    qp = local.qp
    zs = [z.value for z in find_zeros(f1e + ue.scaled(-lam))]
    best = None
    for p in combinations(range(4), 2):
        d = log_distance(qp, zs[p[0]] * zs[p[1]], a2)
        if best is None or d < best[0]:
            best = (d, p)
    if best is None or best[0] > 1e-3:
        return lam
    z1, z2 = zs[best[1][0]], zs[best[1][1]]
    n = round(math.log(abs(z1 * z2 / a2)) / qp.log_abs_q)
    ap = a2 * qp.q ** n

    def H(z):
        pts = np.array([z, ap / z])
        fv, uv = f1e.value(pts), ue.value(pts)
        return fv[1] * uv[0] - fv[0] * uv[1]

    x0, x1 = z1, z1 * (1 + 1e-7)
    h0, h1 = H(x0), H(x1)
    for _ in range(30):
        if h1 == h0:
            break
        x2 = x1 - h1 * (x1 - x0) / (h1 - h0)
        x0, h0 = x1, h1
        x1, h1 = x2, H(x2)
        if abs(x1 - x0) <= 1e-15 * abs(x1):
            break
    pt = np.array([x1])
    return complex(f1e.value(pt)[0] / ue.value(pt)[0])


def generate_quadric(local: LocalData, f1_seed: int | None = None, **kw) -> MonodromyMatrix | None:
    """Independent generator: ``M`` with ``m11 m22 = f1`` and ``det M`` proportional to ``u``.

    Returns ``None`` when the quadratic condition has no admissible root.

    Raises
    ------
    TangencyError
        When the line ``f1 + C u`` touches the quadric at a double point.
    """
    return generate_quadric_detailed(local, f1_seed, **kw).matrix
