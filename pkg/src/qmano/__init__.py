"""Monodromy data of q-difference systems of Jimbo-Sakai type, Mano decompositions and the Fricke cubic."""

from . import datasets, fricke, jsfamily, mano, qcore, qspaces
from .datasets import js_ref, random_local
from .errors import (
    AmbiguityError,
    ConvergenceError,
    DecompositionError,
    InconsistencyError,
    MembershipError,
    PoleError,
    QDomainError,
    QManoError,
    RootFindingError,
    SpaceMismatchError,
    TangencyError,
)
from .jsfamily import LocalData, MonodromyMatrix, validate
from .mano import ManoFactors, PantsPoint, compose, decompose, pants_matrix, recover_pants
from .projective import ProjectivePoint
from .qcore import QParam, theta

__version__ = "0.1.0"
