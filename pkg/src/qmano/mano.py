"""Mano decomposition ``M = P Q`` and the q-pants parameterization.

For a selected pair ``(i, j)`` of singularities (complement ``(k, l)``), every
monodromy matrix factors as ``M = P Q`` where ``P(qx) = R P(x) (C x)**-1`` and
``Q(qx) = C Q(x) (S x)**-1``, ``det P`` vanishing on ``[x_i; q] u [x_j; q]``.
The class of ``C`` is read off the projective invariant: the eigenvalues
``{xi_1, xi_2}`` of ``C`` form the fiber ``Phi_ij**-1(Pi_ij(M))`` of the degree-2
elliptic function ``Phi_ij``.

Generic fibers are parameterized by ``(xi, eta)`` through the chart

    ``M(xi, eta) = Phat . Diag(1, eta) . Qhat``

with ``Phat_rh = theta(v_h x/rho_r) / theta(v_h x_i/rho_r)`` and
``Qhat_hc = theta(sigma_c x/v_h) / theta(sigma_c x_k/v_h)``, where
``v_1 = R(xi)`` and ``v_2 = R(a/xi)`` are annulus representatives.  Using
representatives makes the chart depend on classes only, and the involution
``(xi, eta) <-> (R(a/xi), 1/eta)`` is exact (it swaps the two columns of
``Phat``).  Double fibers (``xi**2 = a``) use the logarithmic chart built from
``phi = theta(xi x/rho)`` and ``psi = x phi'``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    AmbiguityError,
    RootFindingError,
    DecompositionError,
    InconsistencyError,
    PoleError,
    QDomainError,
    QManoError,
)
from .jsfamily import (
    LocalData,
    MonodromyMatrix,
    PAIRS,
    complement,
    line_membership,
    nonzero_column,
    pi_invariant,
)
from .projective import INF, ZERO, ProjectivePoint
from .qcore import AnnulusPoint, QParam, annulus_rep, congruent, log_distance, theta, theta_D
from .qspaces import ThetaExpr, VElement, find_zeros_with_multiplicity, refactor

__all__ = [
    "CentralFactor",
    "ManoFactors",
    "PantsPoint",
    "SpecialValues",
    "SpecialFiber",
    "phi",
    "phi_fiber",
    "special_values",
    "q_invariant",
    "q_invariant_closed_form",
    "pants_matrix",
    "pants_factors",
    "line_matrix",
    "decompose",
    "compose",
    "recover_pants",
    "eta_raw_normal_form",
    "canonical_order",
]

SPECIAL_TOL = 1e-9
NEAR_CRITICAL = 1e-6
NEAR_LOG = 1e-2
FIT_TOL = 1e-7


def _pair(pair) -> tuple[int, int]:
    i, j = (int(pair[0]), int(pair[1]))
    if i == j or not (1 <= i <= 4 and 1 <= j <= 4):
        raise QDomainError(f"invalid pair {pair!r}")
    return i, j


def canonical_order(points: Sequence[complex]) -> list[complex]:
    """Sort by principal argument in ``(-pi, pi]`` and then by modulus."""

    def key(z):
        a = cmath.phase(z)
        if a <= -math.pi + 1e-15:
            a = math.pi
        return (round(a, 12), abs(z))

    return sorted((complex(z) for z in points), key=key)


# ---------------------------------------------------------------------------
# the elliptic function and its special values


def _phi_parts(local: LocalData, pair, xi):
    i, j = _pair(pair)
    qp = local.qp
    r1, r2 = local.rho
    xi_ = local.x(i)
    xj_ = local.x(j)
    num = theta(qp, xi_ * xi / r1) * theta(qp, xj_ * xi / r2)
    den = theta(qp, xi_ * xi / r2) * theta(qp, xj_ * xi / r1)
    return num, den


def phi(local: LocalData, pair, xi: complex) -> ProjectivePoint:
    """``Phi_ij(xi) = theta(x_i xi/rho1) theta(x_j xi/rho2) / (theta(x_i xi/rho2) theta(x_j xi/rho1))``.

    Raises
    ------
    QDomainError
        At ``xi = 0``.
    AmbiguityError
        If numerator and denominator vanish together (excluded by non-resonance).
    """
    xi = complex(xi)
    if xi == 0:
        raise QDomainError("Phi is defined on C*")
    # evaluate at the annulus representative: Phi is elliptic
    v = annulus_rep(local.qp, xi).value
    num, den = _phi_parts(local, pair, v)
    i, j = _pair(pair)
    ref = max(1.0, abs(theta(local.qp, -abs(local.qp.q) ** 0.5))) ** 2
    if max(abs(num), abs(den)) <= 1e-14 * ref:
        raise AmbiguityError("Phi evaluates to 0/0", candidates=[num, den])
    return ProjectivePoint.from_pair(num, den)


def _fiber_expr(local: LocalData, pair, v: ProjectivePoint) -> ThetaExpr:
    i, j = _pair(pair)
    qp = local.qp
    r1, r2 = local.rho
    xi_, xj_ = local.x(i), local.x(j)
    num = ThetaExpr.product(qp, [r1 / xi_, r2 / xj_])
    den = ThetaExpr.product(qp, [r2 / xi_, r1 / xj_])
    a = local.a_pair(pair)
    e = num.scaled(v.den) + den.scaled(-v.num)
    return e.with_char(2, a)


def phi_fiber(local: LocalData, pair, v: ProjectivePoint, with_multiplicity: bool = False,
              relaxed: bool = False):
    """The two solutions of ``Phi_ij(xi) = v`` in ``C_q`` (canonically ordered).

    The equation ``den(v) num(xi) - num(v) den(xi) = 0`` lives in ``V_{2,a}``
    with ``a = rho1 rho2/(x_i x_j)``, so the annulus zero finder applies.
    Where ``Phi`` is nearly flat the two theta products agree to many digits
    and the roots are only determined to about ``eps / |Phi'|``; ``relaxed``
    then accepts roots whose product matches ``a`` to ``1e-4`` (callers are
    expected to polish them, as :func:`decompose` does against ``M``).
    """
    i, j = _pair(pair)
    qp = local.qp
    r1, r2 = local.rho
    if v.distance(ZERO) <= 1e-13:
        pts = [annulus_rep(qp, -r1 / local.x(i)), annulus_rep(qp, -r2 / local.x(j))]
        mult = [1, 1]
    elif v.distance(INF) <= 1e-13:
        pts = [annulus_rep(qp, -r1 / local.x(j)), annulus_rep(qp, -r2 / local.x(i))]
        mult = [1, 1]
    else:
        expr = _fiber_expr(local, pair, v)
        try:
            res = find_zeros_with_multiplicity(expr)
        except RootFindingError:
            if not relaxed:
                raise
            res = find_zeros_with_multiplicity(expr, cong_tol=1e-4)
        pts = [p for p, m in res for _ in range(m)]
        mult = [m for p, m in res for _ in range(m)]
    order = canonical_order([p.value for p in pts])
    out = [annulus_rep(qp, z) for z in order]
    if with_multiplicity:
        return out, max(mult)
    return out


@dataclass(frozen=True)
class SpecialValues:
    pair: tuple
    xi_prime: tuple
    xi_dblprime: tuple
    upsilon: tuple
    crit_values: tuple
    branch_values: tuple
    hyp8: bool

    def to_json(self) -> dict:
        from .serialize import cjson

        return {
            "pair": list(self.pair),
            "xi_prime": [cjson(p.value) for p in self.xi_prime],
            "xi_dblprime": [cjson(p.value) for p in self.xi_dblprime],
            "upsilon": [cjson(p.value) for p in self.upsilon],
            "crit_values": [v.to_json() for v in self.crit_values],
            "branch_values": [v.to_json() for v in self.branch_values],
            "hyp8": self.hyp8,
        }


def _upsilon(local: LocalData, pair) -> list[AnnulusPoint]:
    qp = local.qp
    a = annulus_rep(qp, local.a_pair(pair)).value
    s1 = cmath.sqrt(a)
    s2 = cmath.sqrt(a * qp.q)
    return [annulus_rep(qp, z) for z in canonical_order([s1, -s1, s2, -s2])]


def special_values(local: LocalData, pair) -> SpecialValues:
    """``Xi'``, ``Xi''``, the square roots ``Upsilon`` of ``a`` and the critical values of ``Pi``."""
    return _special_values(local, _pair(pair))


@lru_cache(maxsize=256)
def _special_values(local: LocalData, pair: tuple) -> SpecialValues:
    i, j = pair
    k, l = complement((i, j))
    qp = local.qp
    xp = tuple(annulus_rep(qp, -local.r(h) / local.x(m)) for h in (1, 2) for m in (i, j))
    xpp = tuple(annulus_rep(qp, -local.s(h) * local.x(m)) for h in (1, 2) for m in (k, l))
    pts = [p.value for p in xp + xpp]
    hyp8 = all(
        log_distance(qp, pts[a], pts[b]) > 1e-8 for a in range(8) for b in range(a + 1, 8)
    )
    e1 = phi(local, (i, j), -local.s(1) * local.x(k))
    e2 = phi(local, (i, j), -local.s(2) * local.x(k))
    ups = tuple(_upsilon(local, (i, j)))
    branch = tuple(phi(local, (i, j), u.value) for u in ups)
    return SpecialValues((i, j), xp, xpp, ups, (ZERO, INF, e1, e2), branch, hyp8)


def q_invariant(local: LocalData, h: int, pair, k: int) -> ProjectivePoint:
    """``e_q^{h;i,j;k} = Phi_ij(-sigma_h x_k)`` for ``k`` outside the pair."""
    i, j = _pair(pair)
    if k in (i, j):
        raise QDomainError("k must lie outside the pair")
    return phi(local, (i, j), -local.s(h) * local.x(k))


def q_invariant_closed_form(local: LocalData, h: int, pair, k: int) -> ProjectivePoint:
    """Theta-ratio form of ``e_q^{h;i,j;k}`` obtained by substituting into ``Phi``.

    ``theta(-s x_i x_k/rho1) theta(-s x_j x_k/rho2) / (theta(-s x_j x_k/rho1) theta(-s x_i x_k/rho2))``
    with ``s = sigma_h``.
    """
    i, j = _pair(pair)
    qp = local.qp
    s = local.s(h)
    r1, r2 = local.rho
    xi_, xj_, xk_ = local.x(i), local.x(j), local.x(k)
    num = theta(qp, -s * xi_ * xk_ / r1) * theta(qp, -s * xj_ * xk_ / r2)
    den = theta(qp, -s * xj_ * xk_ / r1) * theta(qp, -s * xi_ * xk_ / r2)
    return ProjectivePoint.from_pair(num, den)


# ---------------------------------------------------------------------------
# factors


@dataclass(frozen=True)
class CentralFactor:
    """Normal form of ``C``: ``Diag(xi1, xi2)`` (generic), ``[[xi, xi], [0, xi]]`` (logarithmic) or ``xi I``."""

    form: str
    xi1: AnnulusPoint
    xi2: AnnulusPoint | None = None

    def matrix(self) -> np.ndarray:
        a = self.xi1.value
        if self.form == "generic":
            return np.diag([a, self.xi2.value])
        if self.form == "logarithmic":
            return np.array([[a, a], [0, a]])
        return np.diag([a, a])

    def to_json(self) -> dict:
        from .serialize import cjson

        d = {"form": self.form, "xi1": cjson(self.xi1.value)}
        if self.xi2 is not None:
            d["xi2"] = cjson(self.xi2.value)
        return d


@dataclass(frozen=True)
class ManoFactors:
    """Factors of ``M = P Q``.

    Generic: ``P_rh = alpha[r,h] theta(v_h x/rho_r)``, ``Q_hc = beta[h,c] theta(sigma_c x/v_h)``.
    Logarithmic (``phi_r = theta(xi x/rho_r)``, ``phibar_c = theta(sigma_c x/xi)``,
    ``psi = x phi'``): ``P_r1 = alpha[r,0] phi_r``, ``P_r2 = alpha[r,1] psi_r + gamma[r] phi_r``,
    ``Q_1c = beta[0,c] phibar_c - beta[1,c] psibar_c``, ``Q_2c = beta[1,c] phibar_c``.
    """

    local: LocalData
    pair: tuple
    central: CentralFactor
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=complex))
    case: str = "I"
    residuals: dict = field(default_factory=dict, compare=False)

    @property
    def values(self) -> tuple:
        c = self.central
        return (c.xi1.value, c.xi2.value if c.xi2 is not None else c.xi1.value)

    # symbolic entries -------------------------------------------------------
    def _p_expr(self, r: int, h: int) -> ThetaExpr | None:
        qp = self.local.qp
        rho = self.local.r(r)
        if self.central.form == "logarithmic":
            xi = self.central.xi1.value
            root = rho / xi
            terms = []
            if h == 1:
                if self.alpha[r - 1, 0] != 0:
                    terms.append(ThetaExpr.product(qp, [root], self.alpha[r - 1, 0]))
            else:
                if self.alpha[r - 1, 1] != 0:
                    terms.append(ThetaExpr.product(qp, [root], self.alpha[r - 1, 1], orders=[1]))
                if self.gamma[r - 1] != 0:
                    terms.append(ThetaExpr.product(qp, [root], self.gamma[r - 1]))
            if not terms:
                return None
            out = terms[0]
            for t in terms[1:]:
                out = out + t
            return out
        c = self.alpha[r - 1, h - 1]
        if c == 0:
            return None
        return ThetaExpr.product(qp, [rho / self.values[h - 1]], c)

    def _q_expr(self, h: int, c: int) -> ThetaExpr | None:
        qp = self.local.qp
        sig = self.local.s(c)
        if self.central.form == "logarithmic":
            xi = self.central.xi1.value
            root = xi / sig
            terms = []
            if h == 1:
                if self.beta[0, c - 1] != 0:
                    terms.append(ThetaExpr.product(qp, [root], self.beta[0, c - 1]))
                if self.beta[1, c - 1] != 0:
                    terms.append(ThetaExpr.product(qp, [root], -self.beta[1, c - 1], orders=[1]))
            elif self.beta[1, c - 1] != 0:
                terms.append(ThetaExpr.product(qp, [root], self.beta[1, c - 1]))
            if not terms:
                return None
            out = terms[0]
            for t in terms[1:]:
                out = out + t
            return out
        b = self.beta[h - 1, c - 1]
        if b == 0:
            return None
        return ThetaExpr.product(qp, [self.values[h - 1] / sig], b)

    def entry_expr(self, r: int, c: int, eta_inserted: complex | None = None) -> ThetaExpr | None:
        """``m_rc = sum_h P_rh E_h Q_hc`` as an exact theta expression (``E = Diag(1, eta)``)."""
        out = None
        for h in (1, 2):
            p, q = self._p_expr(r, h), self._q_expr(h, c)
            if p is None or q is None:
                continue
            term = p * q
            if h == 2 and eta_inserted is not None:
                term = term.scaled(eta_inserted)
            out = term if out is None else out + term
        if out is None:
            return None
        return out.with_char(2, self.local.r(r) / self.local.s(c))

    # numeric values -------------------------------------------------------------
    def P(self, x) -> np.ndarray:
        return _eval_matrix(lambda r, c: self._p_expr(r, c), x)

    def Q(self, x) -> np.ndarray:
        return _eval_matrix(lambda r, c: self._q_expr(r, c), x)

    def functional_residuals(self, n: int = 16) -> dict:
        """Relative residuals of ``P(qx) = R P (Cx)^-1`` and ``Q(qx) = C Q (Sx)^-1``."""
        local = self.local
        q = local.qp.q
        xs = _probe_ring(local, n, 0.37, [])
        R = np.diag(local.rho)
        S = np.diag(local.sigma)
        C = self.central.matrix()
        Ci = np.linalg.inv(C)
        Si = np.linalg.inv(S)
        P0, P1 = self.P(xs), self.P(q * xs)
        Q0, Q1 = self.Q(xs), self.Q(q * xs)
        rp = P1 - np.einsum("ab,nbc,cd->nad", R, P0, Ci) / xs[:, None, None]
        rq = Q1 - np.einsum("ab,nbc,cd->nad", C, Q0, Si) / xs[:, None, None]
        return {
            "P": float(np.max(np.abs(rp)) / np.max(np.abs(P1))),
            "Q": float(np.max(np.abs(rq)) / np.max(np.abs(Q1))),
        }

    def to_json(self) -> dict:
        from .serialize import to_jsonable

        return {
            "pair": list(self.pair),
            "central": self.central.to_json(),
            "alpha": to_jsonable(self.alpha),
            "beta": to_jsonable(self.beta),
            "gamma": to_jsonable(self.gamma),
            "case": self.case,
            "local": self.local.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ManoFactors":
        from .serialize import cparse

        local = LocalData.from_json(d["local"])
        qp = local.qp
        c = d["central"]
        xi2 = annulus_rep(qp, cparse(c["xi2"])) if "xi2" in c else None
        central = CentralFactor(c["form"], annulus_rep(qp, cparse(c["xi1"])), xi2)
        mat = lambda m: np.array([[cparse(v) for v in row] for row in m], dtype=complex)  # noqa: E731
        gamma = np.array([cparse(v) for v in d.get("gamma", [[0, 0], [0, 0]])], dtype=complex)
        return cls(local, tuple(d["pair"]), central, mat(d["alpha"]), mat(d["beta"]), gamma,
                   d.get("case", "I"))


def _eval_matrix(getter, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    out = np.zeros(x.shape + (2, 2), dtype=complex)
    for r in (1, 2):
        for c in (1, 2):
            e = getter(r, c)
            if e is not None:
                out[..., r - 1, c - 1] = e.value(x)
    return out


def _probe_ring(local: LocalData, n: int, exponent: float, avoid: Sequence[complex]) -> np.ndarray:
    qp = local.qp
    r = abs(qp.q) ** exponent
    bad = list(local.xs) + list(avoid)
    pts = []
    t = 0.1234
    tries = 0
    while len(pts) < n:
        x = r * cmath.exp(1j * t)
        if all(log_distance(qp, x, b) > 0.05 for b in bad):
            pts.append(x)
        t += 2 * math.pi * 0.6180339887498949
        tries += 1
        if tries > 50 * n:
            raise InconsistencyError("could not place probe points away from singular spirals")
    return np.array(pts)


# ---------------------------------------------------------------------------
# pants charts


@dataclass(frozen=True)
class PantsPoint:
    """Chart point ``(xi, eta)`` for the pair; ``kind`` is ``"general"`` or ``"log"``.

    On the logarithmic fiber ``eta`` is the free coordinate of the normal form
    ``B = [[eta + v, eta], [1, 1]]``.
    """

    pair: tuple
    xi: AnnulusPoint
    eta: complex
    kind: str = "general"

    def to_json(self) -> dict:
        from .serialize import cjson

        return {"pair": list(self.pair), "xi": cjson(self.xi.value), "eta": cjson(self.eta),
                "kind": self.kind}

    @classmethod
    def from_json(cls, qp: QParam, d: dict) -> "PantsPoint":
        from .serialize import cparse

        return cls(tuple(int(v) for v in d["pair"]), annulus_rep(qp, cparse(d["xi"])),
                   cparse(d["eta"]), d.get("kind", "general"))

    @classmethod
    def make(cls, local: LocalData, pair, xi: complex, eta: complex, kind: str = "general"):
        return cls(_pair(pair), annulus_rep(local.qp, xi), complex(eta), kind)


def _nearest(qp: QParam, z: complex, pts) -> tuple[float, int]:
    ds = [log_distance(qp, z, p.value) for p in pts]
    i = int(np.argmin(ds))
    return ds[i], i


def _general_factors(local: LocalData, pair, v1: complex, v2: complex, eta: complex,
                     case: str = "I") -> ManoFactors:
    i, j = pair
    k, _ = complement(pair)
    qp = local.qp
    v1, v2 = annulus_rep(qp, v1).value, annulus_rep(qp, v2).value
    xi_, xk_ = local.x(i), local.x(k)
    alpha = np.array(
        [[1 / theta(qp, v * xi_ / local.r(r)) for v in (v1, v2)] for r in (1, 2)], dtype=complex
    )
    beta = np.array(
        [[e / theta(qp, local.s(c) * xk_ / v) for c in (1, 2)] for v, e in ((v1, 1.0), (v2, eta))],
        dtype=complex,
    )
    central = CentralFactor("generic", AnnulusPoint(v1, 0), AnnulusPoint(v2, 0))
    return ManoFactors(local, pair, central, alpha, beta, case=case)


def _log_factors(local: LocalData, pair, xi: complex, chi: complex) -> ManoFactors:
    i, j = pair
    k, _ = complement(pair)
    qp = local.qp
    xi_, xk_ = local.x(i), local.x(k)
    lp = [theta_D(qp, xi * xi_ / local.r(r), 1) / theta(qp, xi * xi_ / local.r(r)) for r in (1, 2)]
    u = lp[0] - lp[1]
    lb = [theta_D(qp, local.s(c) * xk_ / xi, 1) / theta(qp, local.s(c) * xk_ / xi) for c in (1, 2)]
    v = lb[0] - lb[1]
    alpha = np.ones((2, 2), dtype=complex)
    gamma = np.array([0.0, u], dtype=complex)
    beta = np.array([[chi + v, chi], [1.0, 1.0]], dtype=complex)
    central = CentralFactor("logarithmic", AnnulusPoint(xi, 0))
    return ManoFactors(local, pair, central, alpha, beta, gamma, case="log")


def pants_factors(local: LocalData, p: PantsPoint) -> ManoFactors:
    """Factors of the chart matrix at ``p`` (no refitting)."""
    pair = _pair(p.pair)
    qp = local.qp
    sv = special_values(local, pair)
    xi = p.xi.value
    if p.kind == "log":
        d, idx = _nearest(qp, xi, sv.upsilon)
        if d > 1e-8:
            raise QDomainError("logarithmic chart needs xi with xi**2 congruent to a")
        return _log_factors(local, pair, sv.upsilon[idx].value, p.eta)
    d_ups, _ = _nearest(qp, xi, sv.upsilon)
    if d_ups <= 1e-9:
        raise PoleError("xi lies in Upsilon: use the logarithmic chart (kind='log')", spiral=xi)
    d_xi, _ = _nearest(qp, xi, sv.xi_prime + sv.xi_dblprime)
    if d_xi <= 1e-9:
        raise PoleError("xi lies in Xi: use line_matrix for special fibers", spiral=xi)
    if p.eta == 0:
        raise QDomainError("eta must be nonzero")
    v2 = annulus_rep(qp, local.a_pair(pair) / xi).value
    return _general_factors(local, pair, xi, v2, p.eta)


def compose(F: ManoFactors, eta_inserted: complex | None = None, tol: float = FIT_TOL) -> MonodromyMatrix:
    """Multiply the factors (optionally with ``Diag(1, eta)`` in between) and refit each entry.

    Raises
    ------
    DecompositionError
        If an entry cannot be refit into factored form within ``tol``.
    """
    local = F.local
    if eta_inserted is not None and F.central.form != "generic":
        raise QDomainError("eta can only be inserted between factors with diagonal C")
    exprs = {(r, c): F.entry_expr(r, c, eta_inserted) for r in (1, 2) for c in (1, 2)}
    probes = _probe_ring(local, 8, 0.37, [])
    mags = {rc: (float(np.max(np.abs(e.value(probes)))) if e is not None else 0.0)
            for rc, e in exprs.items()}
    top = max(mags.values())
    if top == 0:
        raise DecompositionError("product of the factors vanishes identically")
    ents = {}
    for (r, c), e in exprs.items():
        char = local.r(r) / local.s(c)
        if e is None or mags[(r, c)] <= 1e-13 * top:
            ents[f"m{r}{c}"] = VElement.zero(local.qp, 2, char)
            continue
        try:
            ents[f"m{r}{c}"] = refactor(e, a=char, tol=tol)
        except RootFindingError:
            # entries with heavy cancellation have zeros fixed only to
            # rounding/|f'|; retry loosely and let the value residual decide
            try:
                ents[f"m{r}{c}"] = refactor(e, a=char, tol=tol, cong_tol=1e-4)
            except RootFindingError as exc:
                raise DecompositionError(f"refit of m{r}{c} failed: {exc}",
                                         residuals={f"m{r}{c}": str(exc)}) from exc
    return MonodromyMatrix(local, **ents)


def pants_matrix(local: LocalData, p: PantsPoint):
    """``(M, F)``: the chart matrix at ``p`` and its factors."""
    F = pants_factors(local, p)
    return compose(F), F


def eta_raw_normal_form(local: LocalData, F: ManoFactors) -> complex:
    """The invariant ``alpha12 beta21 / (alpha11 beta11)`` of a generic decomposition.

    It is the ``eta`` of the raw normal form ``A = [[1, 1], [1, s]]``,
    ``B = [[1, 1], [eta, eta t]]`` for the same ordered pair ``(xi1, xi2)``.
    """
    if F.central.form != "generic":
        raise QDomainError("only defined for generic factors")
    a, b = F.alpha, F.beta
    return complex(a[0, 1] * b[1, 0] / (a[0, 0] * b[0, 0]))


# ---------------------------------------------------------------------------
# special lines


def line_matrix(local: LocalData, kind: str, h: int, i: int, t: complex = 1.0,
                partner: int | None = None, eta: complex = 1.0):
    """A matrix on ``L_{rho_h, x_i}`` (``kind='rho'``) or ``L_{sigma_h, x_i}`` (``kind='sigma'``).

    ``t`` is the line coordinate; ``t = 0`` gives the crossing with
    ``L_{rho_{3-h}, x_partner}`` (resp. ``L_{sigma_{3-h}, x_partner}``).
    Returns ``(M, F)``.
    """
    qp = local.qp
    if partner is None:
        from .jsfamily import _hyp8

        cands = [w for w in range(1, 5) if w != i]
        if kind == "rho":
            ok = [w for w in cands if _hyp8(local, tuple(sorted((i, w))))]
        else:
            ok = [w for w in cands if _hyp8(local, complement(tuple(sorted((i, w)))))]
        partner = (ok or cands)[0]
    if partner == i:
        raise QDomainError("partner must differ from i")
    t = complex(t)
    if kind == "rho":
        pair = tuple(sorted((i, partner)))
        k, _ = complement(pair)
        if h == 1:
            v1 = annulus_rep(qp, -local.r(1) / local.x(i)).value
            v2 = annulus_rep(qp, -local.r(2) / local.x(partner)).value
            alpha = np.array([[1, 0], [t, 1]], dtype=complex)
        else:
            v1 = annulus_rep(qp, -local.r(1) / local.x(partner)).value
            v2 = annulus_rep(qp, -local.r(2) / local.x(i)).value
            alpha = np.array([[1, t], [0, 1]], dtype=complex)
        beta = np.array(
            [[e / theta(qp, local.s(c) * local.x(k) / v) for c in (1, 2)]
             for v, e in ((v1, 1.0), (v2, eta))], dtype=complex)
    elif kind == "sigma":
        pair = complement(tuple(sorted((i, partner))))
        a = local.a_pair(pair)
        if h == 1:
            v1 = annulus_rep(qp, -local.s(1) * local.x(i)).value
            v2 = annulus_rep(qp, a / v1).value
            beta = np.array([[1, t], [0, 1]], dtype=complex)
        else:
            v2 = annulus_rep(qp, -local.s(2) * local.x(i)).value
            v1 = annulus_rep(qp, a / v2).value
            beta = np.array([[1, 0], [t, 1]], dtype=complex)
        ii = pair[0]
        alpha = np.array(
            [[e / theta(qp, v * local.x(ii) / local.r(r)) for v, e in ((v1, 1.0), (v2, eta))]
             for r in (1, 2)], dtype=complex)
    else:
        raise QDomainError("kind must be 'rho' or 'sigma'")
    central = CentralFactor("generic", AnnulusPoint(v1, 0), AnnulusPoint(v2, 0))
    F = ManoFactors(local, pair, central, alpha, beta, case="special")
    return compose(F), F


# ---------------------------------------------------------------------------
# decomposition


def _lstsq_columns(Mm: np.ndarray, basis) -> tuple[np.ndarray, float]:
    """Fit each column ``c`` of ``M`` as ``sum_h beta[h,c] basis(h, c)`` over the probes.

    Working on ``M`` directly (rather than on ``P**-1 M``) keeps the residual a
    backward error even when ``P`` is badly conditioned at the probes.
    """
    beta = np.zeros((2, 2), dtype=complex)
    fit = np.zeros_like(Mm)
    for c in (1, 2):
        cols = [basis(h, c) for h in (1, 2)]  # each (n, 2) over probes and rows
        A = np.stack([col.reshape(-1) for col in cols], axis=1)
        y = Mm[:, :, c - 1].reshape(-1)
        s = np.linalg.norm(A, axis=0)
        s[s == 0] = 1.0
        sol, *_ = np.linalg.lstsq(A / s, y, rcond=None)
        sol = sol / s
        beta[:, c - 1] = sol
        fit[:, :, c - 1] = (A @ sol).reshape(Mm.shape[0], 2)
    resid = float(np.max(np.abs(Mm - fit)) / np.max(np.abs(Mm)))
    return beta, resid


def _fit_generic_beta(M: MonodromyMatrix, F0: ManoFactors, probes) -> tuple[np.ndarray, float]:
    """Least-squares ``beta`` in ``M = P Q`` with ``Q_hc = beta_hc theta(sigma_c x/v_h)``."""
    local = M.local
    qp = local.qp
    Pm = F0.P(probes)

    def basis(h, c):
        tv = np.asarray(theta(qp, local.s(c) * probes / F0.values[h - 1]))
        return Pm[:, :, h - 1] * tv[:, None]

    beta, resid = _lstsq_columns(M(probes), basis)
    bscale = np.max(np.abs(beta))
    beta[np.abs(beta) <= 1e-12 * bscale] = 0.0
    return beta, resid


def _fit_log_beta(M: MonodromyMatrix, F0: ManoFactors, probes) -> tuple[np.ndarray, float]:
    local = M.local
    qp = local.qp
    xi = F0.central.xi1.value
    Pm = F0.P(probes)

    def basis(h, c):
        arg = local.s(c) * probes / xi
        ph = np.asarray(theta(qp, arg))[:, None]
        if h == 1:
            return Pm[:, :, 0] * ph
        ps = np.asarray(theta_D(qp, arg, 1))[:, None]
        return Pm[:, :, 1] * ph - Pm[:, :, 0] * ps

    return _lstsq_columns(M(probes), basis)


def _product_residual(M: MonodromyMatrix, F: ManoFactors, probes) -> float:
    Mm = M(probes)
    PQ = np.einsum("nab,nbc->nac", F.P(probes), F.Q(probes))
    return float(np.max(np.abs(Mm - PQ)) / np.max(np.abs(Mm)))


def _avoid_points(local: LocalData, vals) -> list[complex]:
    # zeros of theta(sigma_c x/v) and theta(v x/rho_r) lie on -v/sigma_c and -rho_r/v
    out = []
    for v in vals:
        out += [-v / s for s in local.sigma] + [-r / v for r in local.rho]
    return out


def decompose(M: MonodromyMatrix, pair, tol: float = FIT_TOL) -> ManoFactors:
    """Mano decomposition of ``M`` with respect to ``pair``.

    Dispatch: ``Pi_ij(M)`` in ``{0, inf}`` gives the triangular special form;
    a double fiber (``xi**2 = a``) gives the logarithmic form; otherwise the
    generic form ``P = Diag(f_i, g_i) Phat``.  ``Q`` is fitted at 8 probe points
    on ``|x| = |q|**(1/4)`` and the product ``P Q`` is checked against ``M``.

    Raises
    ------
    DecompositionError
        If a residual exceeds ``tol``; the error carries the residual table.
    InconsistencyError
        If the fiber is critical but ``M`` lacks the logarithmic structure.
    """
    local = M.local
    qp = local.qp
    i, j = _pair(pair)
    pair = (i, j)
    v = pi_invariant(M, i, j)
    if v.distance(ZERO) <= SPECIAL_TOL or v.distance(INF) <= SPECIAL_TOL:
        F = _decompose_special(M, pair, v.distance(ZERO) <= SPECIAL_TOL)
        beta_fn = _fit_log_beta if F.central.form == "logarithmic" else _fit_generic_beta
        case = F.case
    else:
        fib, mult = phi_fiber(local, pair, v, with_multiplicity=True, relaxed=True)
        v1, v2 = fib[0].value, fib[1].value
        if mult > 1 or log_distance(qp, v1, v2) < NEAR_CRITICAL:
            F, beta_fn, case = _log_start(M, pair, v1), _fit_log_beta, "log"
        else:
            fi, gi = nonzero_column(M, i)
            probes = _probe_ring(local, 8, 0.25, _avoid_points(local, (v1, v2)))
            v1, v2 = _refine_fiber(M, pair, (fi, gi), v1, v2, probes)
            F0 = _general_factors(local, pair, v1, v2, 1.0)
            alpha = F0.alpha * np.array([fi, gi])[:, None]
            F = replace(F0, alpha=alpha)
            beta_fn = _fit_generic_beta
            case = "I"
    F, residuals = _fit_and_check(M, F, beta_fn, case)
    if case == "I" and log_distance(qp, *F.values) < NEAR_LOG:
        # where Phi is flat a critical fiber splits by ~sqrt(eps); the exact
        # logarithmic form then fits far better than the split generic one
        try:
            G, res_g = _fit_and_check(M, _log_start(M, pair, F.values[0]), _fit_log_beta, "log")
            if res_g["product"] < 1e-3 * residuals["product"]:
                F, residuals = G, res_g
        except (QManoError, np.linalg.LinAlgError):
            pass
    if residuals["fit"] > tol or residuals["product"] > tol:
        if F.case == "log":
            raise InconsistencyError(
                f"critical fiber but M does not have the logarithmic structure: {residuals}"
            )
        raise DecompositionError(f"decomposition residual too large: {residuals}", residuals)
    return F


def _log_start(M: MonodromyMatrix, pair, near: complex) -> ManoFactors:
    """Logarithmic factors at the point of ``Upsilon`` nearest ``near``, left factor fitted to ``M``."""
    local = M.local
    qp = local.qp
    i = pair[0]
    ups = _upsilon(local, pair)
    _, idx = _nearest(qp, near, ups)
    xi = ups[idx].value
    fi, gi = nonzero_column(M, i)
    F0 = _log_factors(local, pair, xi, 0.0)
    phi_i = np.array([theta(qp, xi * local.x(i) / local.r(r)) for r in (1, 2)])
    d = np.array([fi, gi]) / phi_i
    return replace(F0, alpha=F0.alpha * d[:, None], gamma=F0.gamma * d)


def _fit_and_check(M: MonodromyMatrix, F: ManoFactors, beta_fn, case: str):
    local = M.local
    probes = _probe_ring(local, 8, 0.25, _avoid_points(local, F.values))
    beta, r_fit = beta_fn(M, F, probes)
    F = replace(F, beta=beta, case=case)
    check = _probe_ring(local, 16, 0.41, _avoid_points(local, F.values))
    residuals = {"fit": r_fit, "product": _product_residual(M, F, check)}
    return replace(F, residuals=residuals), residuals


def _refine_fiber(M: MonodromyMatrix, pair, col, v1: complex, v2: complex, probes,
                  iters: int = 8) -> tuple[complex, complex]:
    """Polish the fiber against ``M`` itself.

    ``Pi`` can be a poorly conditioned function of ``xi`` (when ``Phi`` is
    nearly flat), while the right factor ``Phat**-1 M`` only has the theta form
    for the true eigenvalues.  Gauss-Newton on the fit residual, with
    ``v1 v2`` held fixed, recovers the digits lost in the fiber equation.
    """
    local = M.local
    a = local.a_pair(pair)
    m = round(math.log(abs(v1 * v2 / a)) / local.qp.log_abs_q)
    c = a * local.qp.q ** m

    Mm = M(probes)
    scale = np.max(np.abs(Mm))

    def resid(z):
        F = _general_factors(local, pair, z, c / z, 1.0)
        F = replace(F, alpha=F.alpha * np.array(col)[:, None])
        beta, _ = _fit_generic_beta(M, F, probes)
        r = (Mm - np.einsum("nab,nbc->nac", F.P(probes), replace(F, beta=beta).Q(probes))) / scale
        r = r.reshape(-1)
        return np.concatenate([r.real, r.imag])

    z = complex(v1)
    r = resid(z)
    best = float(np.linalg.norm(r))
    for _ in range(iters):
        if best < 1e-14:
            break
        hstep = 1e-7 * abs(z)
        J = np.stack([(resid(z + hstep) - r) / hstep, (resid(z + 1j * hstep) - r) / hstep], axis=1)
        d, *_ = np.linalg.lstsq(J, -r, rcond=None)
        z_new = z + complex(d[0], d[1])
        r_new = resid(z_new)
        n_new = float(np.linalg.norm(r_new))
        if not n_new < best:
            break
        z, r, best = z_new, r_new, n_new
    return z, c / z


def _decompose_special(M: MonodromyMatrix, pair, at_zero: bool) -> ManoFactors:
    """Left factor on a fiber over 0 (``at_zero``) or infinity.

    Over infinity the roles of ``x_i`` and ``x_j`` swap, so both cases are
    handled with ``(u, w)``: ``f_u = 0`` or ``g_w = 0``, where
    ``v1 = -rho1/x_u`` and ``v2 = -rho2/x_w`` are the fiber points.
    """
    local = M.local
    qp = local.qp
    i, j = pair
    u, w = (i, j) if at_zero else (j, i)
    v1 = annulus_rep(qp, -local.r(1) / local.x(u)).value
    v2 = annulus_rep(qp, -local.r(2) / local.x(w)).value
    fu_zero = line_membership(M, "rho", 1, u)
    gw_zero = line_membership(M, "rho", 2, w)
    if not (fu_zero or gw_zero):
        raise InconsistencyError("Pi is 0 or infinity but no row of M(x_u), M(x_w) vanishes")
    if log_distance(qp, v1, v2) < NEAR_CRITICAL:
        return _decompose_double_special(M, pair, u, w, v1, fu_zero, gw_zero)
    if fu_zero and gw_zero:
        alpha = np.array([[1, 0], [0, 1]], dtype=complex)
    elif fu_zero:
        fw, gw = nonzero_column(M, w)
        c = gw * theta(qp, v1 * local.x(w) / local.r(1)) / (fw * theta(qp, v1 * local.x(w) / local.r(2)))
        alpha = np.array([[1, 0], [c, 1]], dtype=complex)
    else:
        fu, gu = nonzero_column(M, u)
        c = fu * theta(qp, v2 * local.x(u) / local.r(2)) / (gu * theta(qp, v2 * local.x(u) / local.r(1)))
        alpha = np.array([[1, c], [0, 1]], dtype=complex)
    central = CentralFactor("generic", AnnulusPoint(v1, 0), AnnulusPoint(v2, 0))
    return ManoFactors(local, pair, central, alpha, np.zeros((2, 2), dtype=complex), case="IIa")


def _decompose_double_special(M: MonodromyMatrix, pair, u: int, w: int, xi: complex,
                              fu_zero: bool, gw_zero: bool) -> ManoFactors:
    """Special fiber whose two points coincide: ``xi = -rho1/x_u = -rho2/x_w`` modulo q.

    With ``phi_r = theta(xi x/rho_r)`` (so ``phi_1(x_u) = phi_2(x_w) = 0``) and
    ``psi_r = x phi_r'``: both rows null gives ``C = xi I``, ``P = Diag(phi_1, phi_2)``;
    otherwise ``C = [[xi, xi], [0, xi]]`` with one row of ``P`` reduced to ``(0, c phi_r)``,
    ``c`` chosen so that the surviving column at the other point is proportional
    to the column of ``M`` there.
    """
    local = M.local
    qp = local.qp
    zeros = np.zeros((2, 2), dtype=complex)
    if fu_zero and gw_zero:
        central = CentralFactor("generic", AnnulusPoint(xi, 0), AnnulusPoint(xi, 0))
        return ManoFactors(local, pair, central, np.eye(2, dtype=complex), zeros, case="IIb")

    def ph(r, m):
        return theta(qp, xi * local.x(m) / local.r(r))

    def ps(r, m):
        return theta_D(qp, xi * local.x(m) / local.r(r), 1)

    if fu_zero:
        # P = [[0, c phi_1], [phi_2, psi_2]]; right column at x_w is (c phi_1, psi_2)
        fw, gw = nonzero_column(M, w)
        alpha = np.array([[0, 0], [1, 1]], dtype=complex)
        gamma = np.array([fw * ps(2, w) / (gw * ph(1, w)), 0], dtype=complex)
    else:
        # P = [[phi_1, psi_1], [0, c phi_2]]; right column at x_u is (psi_1, c phi_2)
        fu, gu = nonzero_column(M, u)
        alpha = np.array([[1, 1], [0, 0]], dtype=complex)
        gamma = np.array([0, gu * ps(1, u) / (fu * ph(2, u))], dtype=complex)
    central = CentralFactor("logarithmic", AnnulusPoint(xi, 0))
    return ManoFactors(local, pair, central, alpha, zeros, gamma, case="IIb")


# ---------------------------------------------------------------------------
# chart inversion


@dataclass(frozen=True)
class SpecialFiber:
    """Result of :func:`recover_pants` on a special fiber: the special lines containing ``M``."""

    pair: tuple
    lines: tuple
    factors: ManoFactors

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "lines": [f"L_{kind}{h},x{i}" for kind, h, i in self.lines],
            "factors": self.factors.to_json(),
        }


def _pair_lines(M: MonodromyMatrix, pair) -> tuple:
    i, j = pair
    k, l = complement(pair)
    out = []
    for h in (1, 2):
        for m in (i, j):
            if line_membership(M, "rho", h, m):
                out.append(("rho", h, m))
    for h in (1, 2):
        for m in (k, l):
            if line_membership(M, "sigma", h, m):
                out.append(("sigma", h, m))
    return tuple(out)


def recover_pants(M: MonodromyMatrix, pair, F: ManoFactors | None = None):
    """Canonical chart point of ``M``, or a :class:`SpecialFiber` naming its special lines.

    The canonical ``xi`` is the fiber element first in (argument, modulus)
    order; ``eta`` is then read from the normalized right factor.
    """
    local = M.local
    qp = local.qp
    pair = _pair(pair)
    i, j = pair
    k, _ = complement(pair)
    F = F if F is not None else decompose(M, pair)
    lines = _pair_lines(M, pair)
    if F.case in ("IIa", "IIb") or lines:
        return SpecialFiber(pair, lines, F)
    if F.central.form == "logarithmic":
        # Q columns normalized so that the second row is (1, 1): chi = beta12/beta22
        b = F.beta
        chi = complex(b[0, 1] / b[1, 1])
        return PantsPoint(pair, F.central.xi1, chi, "log")
    v1, v2 = F.values
    # normalized right factor: betahat_hc = beta_hc theta(sigma_c x_k / v_h)
    bh = np.array([[F.beta[h, c] * theta(qp, local.s(c + 1) * local.x(k) / F.values[h])
                    for c in (0, 1)] for h in (0, 1)])
    # the left factor is Diag(f_i, g_i) Phat, so the chart coordinate is the
    # ratio of the two rows; fitted jointly and checked as a backward error
    eta = complex(np.vdot(bh[0], bh[1]) / np.vdot(bh[0], bh[0]))
    mismatch = np.linalg.norm(bh[1] - eta * bh[0]) / np.linalg.norm(bh)
    if mismatch > 1e-6:
        raise InconsistencyError(f"rows of the normalized right factor are not proportional "
                                 f"(mismatch {mismatch:.1e})")
    return PantsPoint(pair, annulus_rep(qp, v1), eta, "general")
