"""Complex q-special functions.

Everything here is built on the Jacobi theta function

.. math:: \\theta_q(x) = \\sum_{n\\in\\mathbb{Z}} q^{n(n-1)/2} x^n,

which satisfies :math:`\\theta_q(qx) = \\theta_q(x)/x = \\theta_q(1/x)` and has
simple zeros exactly on the spiral :math:`-q^{\\mathbb{Z}}`.  Arguments are first
reduced into the fundamental annulus :math:`C_q = \\{|q| < |z| \\le 1\\}`; the
functional equation supplies an exact monomial cofactor and the bilateral series
is summed on the reduced argument, which keeps conditioning uniform.

All functions accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, PoleError, QDomainError

__all__ = [
    "QParam",
    "AnnulusPoint",
    "theta",
    "theta_deriv",
    "theta_D",
    "theta_D_all",
    "q_log",
    "pochhammer",
    "e_char",
    "de_rham_solution",
    "annulus_rep",
    "annulus_reduce",
    "congruent",
    "log_distance",
]

_SERIES_EPS = 1e-18
_MAX_TERMS = 4000
_BOUNDARY_EPS = 1e-12


@dataclass(frozen=True)
class QParam:
    """The base ``q`` together with the default numerical tolerances.

    Parameters
    ----------
    q : complex
        Base of the dilatation ``x -> q x``; ``0 < |q| < 1``.
    tol_eq : float
        Default relative tolerance for numerical equality.
    tol_cong : float
        Relative tolerance used when matching annulus representatives.
    """

    q: complex
    tol_eq: float = 1e-10
    tol_cong: float = 1e-9

    def __post_init__(self):
        q = complex(self.q)
        object.__setattr__(self, "q", q)
        if not 0.0 < abs(q) < 1.0:
            raise QDomainError(f"|q| must lie in (0, 1), got |q| = {abs(q)!r}")
        for name in ("tol_eq", "tol_cong"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0):
                raise QDomainError(f"{name} must be finite and positive, got {val!r}")
            object.__setattr__(self, name, val)

    @property
    def log_abs_q(self) -> float:
        return math.log(abs(self.q))

    def power(self, k) -> complex | np.ndarray:
        """``q**k`` for integer ``k`` (scalar or array)."""
        return np.power(self.q, np.asarray(k, dtype=float)) if np.ndim(k) else self.q ** int(k)


@dataclass(frozen=True)
class AnnulusPoint:
    """Representative ``value`` in ``C_q`` with ``original = value * q**shift``."""

    value: complex
    shift: int
    near_boundary: bool = False

    def original(self, qp: QParam) -> complex:
        return self.value * qp.q ** self.shift


# ---------------------------------------------------------------------------
# annulus reduction


def annulus_reduce(qp: QParam, x):
    """Vectorised reduction: returns ``(v, k)`` arrays with ``x = v q**k``, ``v`` in ``C_q``."""
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0):
        raise QDomainError("annulus reduction of 0 is undefined")
    q = qp.q
    L = qp.log_abs_q
    k = np.floor(np.log(np.abs(x)) / L).astype(np.int64)
    v = x * np.power(q, -k.astype(float))
    aq = abs(q)
    # floor() can be off by one through rounding; two passes are always enough
    for _ in range(2):
        hi = np.abs(v) > 1.0
        if np.any(hi):
            v = np.where(hi, v * q, v)
            k = np.where(hi, k - 1, k)
        lo = np.abs(v) <= aq
        if np.any(lo):
            v = np.where(lo, v / q, v)
            k = np.where(lo, k + 1, k)
    return v, k


def annulus_rep(qp: QParam, x: complex) -> AnnulusPoint:
    """Unique representative of ``x`` modulo ``q**Z`` in ``C_q``.

    Examples
    --------
    >>> qp = QParam(0.5)
    >>> annulus_rep(qp, -5)
    AnnulusPoint(value=(-0.625+0j), shift=-3, near_boundary=False)

    The returned ``shift`` satisfies ``value * q**shift == x``.
    """
    v, k = annulus_reduce(qp, complex(x))
    v = complex(v)
    r = abs(v)
    near = abs(r - 1.0) < _BOUNDARY_EPS or abs(r - abs(qp.q)) < _BOUNDARY_EPS * abs(qp.q)
    return AnnulusPoint(v, int(k), near)


def congruent(qp: QParam, a: complex, b: complex) -> int | None:
    """Return ``k`` with ``a ~ b q**k`` (relative tolerance ``tol_cong``), else ``None``.

    Comparison is done on annulus representatives, with the two neighbouring
    sheets also tried so that points straddling ``|z| = 1`` still match.
    """
    a, b = complex(a), complex(b)
    if a == 0 or b == 0:
        raise QDomainError("congruence is only defined on C*")
    ra, rb = annulus_rep(qp, a), annulus_rep(qp, b)
    best = None
    for d in (0, 1, -1):
        err = abs(ra.value - rb.value * qp.q ** d)
        if err <= qp.tol_cong * abs(ra.value) and (best is None or err < best[0]):
            best = (err, ra.shift - rb.shift + d)
    return None if best is None else best[1]


def log_distance(qp: QParam, a: complex, b: complex) -> float:
    """Distance between the classes of ``a`` and ``b`` on ``E_q``, in log coordinates.

    Uses ``log`` of the reduced quotient; 0 means congruent.
    """
    w = annulus_rep(qp, complex(a) / complex(b)).value
    # w is near 1 or near q (inner boundary); for complex q the second case
    # must be measured on w/q, whose argument differs from that of w
    return min(abs(cmath.log(w)), abs(cmath.log(w / qp.q)))


# ---------------------------------------------------------------------------
# theta function and its logarithmic derivatives


@lru_cache(maxsize=64)
def _series_table(q: complex, order: int):
    aq = abs(q)
    need = math.log(_SERIES_EPS) / math.log(aq)
    # n(n-1)/2 > need, plus slack for the polynomial weights n**order
    n_max = int(math.ceil(0.5 + math.sqrt(0.25 + 2.0 * need))) + 2 + order
    if n_max > _MAX_TERMS:
        raise ConvergenceError(
            "theta series budget exceeded; |q| is too close to 1",
            abs_q=aq, terms_needed=n_max, budget=_MAX_TERMS,
        )
    n = np.arange(-n_max, n_max + 1)
    logq = complex(np.log(q))
    coef = np.exp((n * (n - 1) // 2) * logq)
    return n, coef


def _reduced_sums(qp: QParam, x, order: int):
    """Cofactor, shift and the weighted sums ``S_j = sum n**j c_n v**n`` for ``j <= order``."""
    v, k = annulus_reduce(qp, x)
    n, coef = _series_table(qp.q, order)
    logv = np.log(v)[..., None]
    terms = coef * np.exp(n * logv)
    sums = [terms.sum(axis=-1)]
    w = terms
    for _ in range(order):
        w = w * n
        sums.append(w.sum(axis=-1))
    kf = k.astype(float)
    logq = complex(np.log(qp.q))
    cof = np.exp(-kf * np.log(v) - 0.5 * kf * (kf - 1.0) * logq)
    return cof, kf, sums


def _scalar_out(x, arr):
    return complex(arr) if np.ndim(x) == 0 else arr


def theta(qp: QParam, x):
    """Jacobi theta function ``theta_q(x)``.

    Raises
    ------
    QDomainError
        If ``x == 0``.
    ConvergenceError
        If ``|q|`` is so close to 1 that the series budget is exceeded.
    """
    cof, _, sums = _reduced_sums(qp, x, 0)
    return _scalar_out(x, cof * sums[0])


def theta_D(qp: QParam, x, order: int = 1):
    """``(x d/dx)**order`` applied to ``theta_q``, evaluated at ``x``.

    The Euler operator ``D = x d/dx`` commutes with dilations, so
    ``D[theta(x/a)] = (D theta)(x/a)``; this is what makes it convenient for
    factored products.
    """
    if order < 0:
        raise QDomainError("order must be non-negative")
    cof, kf, sums = _reduced_sums(qp, x, order)
    # D(v**-k g) = v**-k (D - k) g, expanded binomially
    out = 0
    for m in range(order + 1):
        out = out + math.comb(order, m) * (-kf) ** (order - m) * sums[m]
    return _scalar_out(x, cof * out)


def theta_D_all(qp: QParam, x, order: int):
    """List ``[D**j theta(x) for j in 0..order]`` sharing one series evaluation."""
    cof, kf, sums = _reduced_sums(qp, x, order)
    out = []
    for j in range(order + 1):
        acc = 0
        for m in range(j + 1):
            acc = acc + math.comb(j, m) * (-kf) ** (j - m) * sums[m]
        out.append(cof * acc)
    return out


def theta_deriv(qp: QParam, x):
    """Ordinary derivative ``theta_q'(x)``."""
    x_arr = np.asarray(x, dtype=complex)
    return _scalar_out(x, np.asarray(theta_D(qp, x_arr, 1)) / x_arr)


def q_log(qp: QParam, x):
    """The q-logarithm ``l_q(x) = x theta_q'(x) / theta_q(x)``.

    It satisfies ``l_q(qx) = l_q(x) - 1`` and has simple poles on ``-q**Z``.
    """
    _, kf, sums = _reduced_sums(qp, x, 1)
    s0, s1 = sums
    if np.any(np.abs(s0) <= 1e-15 * np.maximum(np.abs(s1), 1.0)):
        raise PoleError("q-logarithm evaluated on the pole spiral", spiral=-1.0)
    return _scalar_out(x, s1 / s0 - kf)


def de_rham_solution(qp: QParam, c: complex, a: complex, b: complex, x):
    """Particular solution ``-c l_q(x/a) + b`` of ``f(qx) - f(x) = c``."""
    x = np.asarray(x, dtype=complex)
    return _scalar_out(x, -c * np.asarray(q_log(qp, x / a)) + b)


def e_char(qp: QParam, c: complex, x):
    """Character ``e_{q,c}(x) = theta_q(x/c) / theta_q(x)``; ``e(qx) = c e(x)``.

    Raises
    ------
    PoleError
        If ``x`` lies on the spiral ``[-1; q]`` where the denominator vanishes.
    """
    c = complex(c)
    if c == 0:
        raise QDomainError("character c must be nonzero")
    xa = np.asarray(x, dtype=complex)
    v, _ = annulus_reduce(qp, xa)
    if np.any(np.abs(v + 1.0) < 1e-13):
        raise PoleError("e_{q,c} has poles over [-1; q]", spiral=-1.0)
    num = np.asarray(theta(qp, xa / c))
    den = np.asarray(theta(qp, xa))
    return _scalar_out(x, num / den)


def pochhammer(qp: QParam, a: complex, n=math.inf) -> complex:
    """q-Pochhammer symbol ``(a; q)_n = prod_{i<n} (1 - a q**i)``.

    ``n = math.inf`` gives the convergent infinite product, truncated once
    ``|a q**i| < 1e-17``.
    """
    a = complex(a)
    q = qp.q
    out = 1.0 + 0j
    if n == math.inf:
        term = a
        i = 0
        while abs(term) >= 1e-17:
            out *= 1.0 - term
            term *= q
            i += 1
            if i > 100000:
                raise ConvergenceError("Pochhammer product did not converge", abs_q=abs(q))
        return out
    if n < 0 or int(n) != n:
        raise QDomainError("n must be a natural number or math.inf")
    term = a
    for _ in range(int(n)):
        out *= 1.0 - term
        term *= q
    return out
