"""Points of the projective line stored as normalized homogeneous pairs."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import QDomainError

CHORDAL_TOL = 1e-7


@dataclass(frozen=True)
class ProjectivePoint:
    """``(num : den)`` with ``max(|num|, |den|) == 1``; infinity is ``(1 : 0)``."""

    num: complex
    den: complex

    @classmethod
    def from_pair(cls, num: complex, den: complex) -> "ProjectivePoint":
        num, den = complex(num), complex(den)
        m = max(abs(num), abs(den))
        if m == 0 or not math.isfinite(m):
            raise QDomainError("(0 : 0) is not a point of P^1")
        # fix the phase so that equal points get equal pairs
        lead = num if abs(num) >= abs(den) else den
        ph = lead / abs(lead)
        return cls(num / (m * ph), den / (m * ph))

    @classmethod
    def from_value(cls, v) -> "ProjectivePoint":
        if v is None or (isinstance(v, float) and math.isinf(v)):
            return INF
        v = complex(v)
        if cmath.isinf(v):
            return INF
        return cls.from_pair(v, 1.0)

    @property
    def is_infinite(self) -> bool:
        return self.den == 0

    def value(self) -> complex:
        """Affine value ``num/den``; ``complex('inf')`` at infinity."""
        if self.den == 0:
            return complex(math.inf, 0.0)
        return self.num / self.den

    def distance(self, other: "ProjectivePoint") -> float:
        """Chordal distance ``|n1 d2 - n2 d1| / (||p1|| ||p2||)``."""
        a = abs(self.num * other.den - other.num * self.den)
        n1 = math.hypot(abs(self.num), abs(self.den))
        n2 = math.hypot(abs(other.num), abs(other.den))
        return a / (n1 * n2)

    def close(self, other: "ProjectivePoint", tol: float = CHORDAL_TOL) -> bool:
        return self.distance(other) <= tol

    def to_json(self) -> dict:
        from .serialize import cjson

        return {"num": cjson(self.num), "den": cjson(self.den)}

    @classmethod
    def from_json(cls, d) -> "ProjectivePoint":
        from .serialize import cparse

        if isinstance(d, dict):
            return cls.from_pair(cparse(d["num"]), cparse(d["den"]))
        if d == "inf":
            return INF
        return cls.from_value(cparse(d))

    def __repr__(self) -> str:
        if self.den == 0:
            return "ProjectivePoint(inf)"
        return f"ProjectivePoint({self.value():.12g})"


ZERO = ProjectivePoint(0j, 1 + 0j)
INF = ProjectivePoint(1 + 0j, 0j)
