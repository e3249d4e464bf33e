"""Exception hierarchy shared by the services and the command line."""
from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover - typing only
    from qsylv.models.schemas import ConditionId


class QSylvError(Exception):
    """Base class for every error raised by the library."""


class DimError(QSylvError, ValueError):
    """A dimension or coupling constraint is violated."""


class StructureViolation(QSylvError):
    """A complex matrix does not carry the complex-adjoint block structure."""

    def __init__(self, residual: float) -> None:
        super().__init__(f"complex-adjoint structure residual {residual:.3e} exceeds tolerance")
        self.residual = residual


class PairingViolation(QSylvError):
    """An odd number of singular values of an embedding survived the rank threshold.

    Signals a tolerance straddle; the caller has to adjust ``rel_tol``.
    """

    def __init__(self, count: int, condition: ConditionId | None = None) -> None:
        where = f" while evaluating {condition.label()}" if condition is not None else ""
        super().__init__(
            f"{count} singular values above threshold (expected an even count){where}; "
            "adjust the relative tolerance"
        )
        self.count = count
        self.condition = condition

    def at(self, condition: ConditionId) -> PairingViolation:
        return PairingViolation(self.count, condition)


class Inconsistent(QSylvError):
    """The equation or system has no exact solution."""

    def __init__(
        self,
        message: str,
        *,
        condition: ConditionId | None = None,
        level: int | None = None,
        residual: float | None = None,
    ) -> None:
        super().__init__(message)
        self.condition = condition
        self.level = level
        self.residual = residual


class PerEquationInconsistent(Inconsistent):
    """A single equation of a chain is already inconsistent on its own."""

    def __init__(self, index: int, condition: ConditionId | None = None) -> None:
        super().__init__(f"equation {index} is inconsistent on its own", condition=condition)
        self.index = index


class NotEtaHermitianRHS(QSylvError, ValueError):
    def __init__(self, index: int, residual: float) -> None:
        super().__init__(f"E_{index} is not eta-Hermitian (residual {residual:.3e})")
        self.index = index
        self.residual = residual


class SizeCapExceeded(QSylvError):
    def __init__(self, unknowns: int, cap: int) -> None:
        super().__init__(f"linearization needs {unknowns} real unknowns, cap is {cap}")
        self.unknowns = unknowns
        self.cap = cap


class ParseError(QSylvError, ValueError):
    """Problem or solution file rejected; ``pointer`` is a JSON pointer to the culprit."""

    def __init__(self, pointer: str, message: str) -> None:
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.detail = message
