"""Exception hierarchy shared by all qmano modules."""

from __future__ import annotations


class QManoError(Exception):
    """Base class for every error raised by the library."""


class QDomainError(QManoError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(QManoError, ArithmeticError):
    """A series or iteration could not reach the requested accuracy."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class PoleError(QManoError, ZeroDivisionError):
    """Evaluation hit a pole; ``spiral`` is a representative of the bad q-spiral."""

    def __init__(self, message: str, spiral: complex | None = None):
        super().__init__(message)
        self.spiral = spiral


class SpaceMismatchError(QManoError, TypeError):
    """Two elements do not live in the same solution space."""


class RootFindingError(QManoError, ArithmeticError):
    """The annulus zero counter or the Newton polish failed."""

    def __init__(self, message: str, cells=None, residuals=None):
        super().__init__(message)
        self.cells = list(cells or [])
        self.residuals = list(residuals or [])


class AmbiguityError(QManoError, ArithmeticError):
    """A numerical decision could not be made within tolerance."""

    def __init__(self, message: str, candidates=None):
        super().__init__(message)
        self.candidates = list(candidates or [])


class InconsistencyError(QManoError, ArithmeticError):
    """Data violate a structural property the theory guarantees."""


class DecompositionError(QManoError, ArithmeticError):
    """A Mano decomposition could not be verified; carries the residual table."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class MembershipError(QManoError, ArithmeticError):
    """A matrix fails the determinant membership test; carries ``C`` and the residual."""

    def __init__(self, message: str, constant=None, residual=None):
        super().__init__(message)
        self.constant = constant
        self.residual = residual


class TangencyError(QManoError, ArithmeticError):
    """The affine line through ``f1`` meets the quadric at a double point."""

    def __init__(self, message: str, root=None):
        super().__init__(message)
        self.root = root
