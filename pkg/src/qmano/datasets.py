"""Reference and seeded random local data."""

from __future__ import annotations

import cmath
import math

import numpy as np

from .jsfamily import LocalData, validate
from .qcore import QParam

__all__ = ["js_ref", "random_local", "random_local_many", "DEFAULT_SEED"]

DEFAULT_SEED = 20240611


def js_ref() -> LocalData:
    """``q = 1/2``, ``rho = (1, 3)``, ``sigma = (1, 5)``, ``x = (0.6, 0.7, 0.8, 25/14)``.

    Fuchs relation holds with shift 0, non-resonance and non-splitting hold,
    and the eight special values are distinct for every pair except ``(1, 3)``,
    where ``-rho1/x3`` and ``-rho2/x1`` coincide modulo ``q``.
    """
    return LocalData(QParam(0.5), (1.0, 3.0), (1.0, 5.0), (0.6, 0.7, 0.8, 25 / 14))


def _unit_point(rng: np.random.Generator, lo: float, hi: float) -> complex:
    r = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    return r * cmath.exp(1j * rng.uniform(-math.pi, math.pi))


def random_local(seed: int, q: complex | None = None, max_tries: int = 200) -> LocalData:
    """Random data with exact Fuchs relation (shift 0) and the eight-distinct-values hypothesis on all pairs.

    ``x4`` is solved from the Fuchs relation, so ``x1 x2 x3 x4 = rho1 rho2/(sigma1 sigma2)``
    holds to rounding.  Candidates whose special values come within ``0.05``
    (log-distance) of each other are rejected to keep the data well separated.
    """
    from itertools import combinations

    from .jsfamily import PAIRS, _special_sets
    from .qcore import log_distance

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        qq = q if q is not None else 0.5 * cmath.exp(1j * rng.uniform(-0.6, 0.6))
        qp = QParam(qq)
        rho = (_unit_point(rng, 0.6, 1.6), _unit_point(rng, 0.6, 1.6))
        sigma = (_unit_point(rng, 0.6, 1.6), _unit_point(rng, 0.6, 1.6))
        x3 = [_unit_point(rng, 0.6, 1.6) for _ in range(3)]
        x4 = rho[0] * rho[1] / (sigma[0] * sigma[1] * x3[0] * x3[1] * x3[2])
        local = LocalData(qp, rho, sigma, tuple(x3) + (x4,))
        rep = validate(local)
        if not (rep.fr and rep.fr_shift == 0 and rep.nr and all(rep.ns.values())
                and rep.hyp48 and not rep.has_splitting):
            continue
        sep = True
        for pair in PAIRS:
            xp, xpp = _special_sets(local, pair)
            if min(log_distance(qp, a, b) for a, b in combinations(xp + xpp, 2)) < 0.05:
                sep = False
                break
        if sep and min(log_distance(qp, a, b) for a, b in combinations(local.xs, 2)) > 0.05:
            return local
    raise RuntimeError(f"no admissible local data found for seed {seed}")


def random_local_many(seed: int, n: int) -> list[LocalData]:
    return [random_local(seed + 7919 * k) for k in range(n)]
