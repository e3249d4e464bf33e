from __future__ import annotations

import enum
import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt, model_validator

from qsylv.services.quat_core import EtaUnit


class ConditionKind(str, enum.Enum):
    """Shape family of one rank equality in a solvability certificate."""

    ROW = "row"
    COL = "col"
    AD = "ad"
    BC = "bc"
    STAIR_ROW = "stair_row"
    STAIR_COL = "stair_col"
    STAIR_AD = "stair_ad"
    STAIR_BC = "stair_bc"
    ETA_ROW = "eta_row"
    ETA_AD = "eta_ad"
    ETA_STAIR_ROW = "eta_stair_row"
    ETA_STAIR_AD = "eta_stair_ad"

    @property
    def is_pairwise(self) -> bool:
        return self.value.startswith(("stair_", "eta_stair_"))


class ConditionId(BaseModel):
    """Kind plus 1-based indices: ``(i,)`` for single-equation kinds, ``(m, n)`` with m < n otherwise."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ConditionKind
    indices: tuple[PositiveInt, ...]

    @model_validator(mode="after")
    def _check_indices(self) -> ConditionId:
        if self.kind.is_pairwise:
            if len(self.indices) != 2 or self.indices[0] >= self.indices[1]:
                raise ValueError(f"{self.kind.value} needs indices (m, n) with m < n")
        elif len(self.indices) != 1:
            raise ValueError(f"{self.kind.value} needs a single equation index")
        return self

    @classmethod
    def single(cls, kind: ConditionKind, i: int) -> ConditionId:
        return cls(kind=kind, indices=(i,))

    @classmethod
    def pair(cls, kind: ConditionKind, m: int, n: int) -> ConditionId:
        return cls(kind=kind, indices=(m, n))

    @property
    def window(self) -> tuple[int, int]:
        """Equation window ``(m, n)``; single kinds collapse to ``(i, i)``."""
        return (self.indices[0], self.indices[-1])

    def label(self) -> str:
        return f"{self.kind.value}{list(self.indices)}"


class ConditionEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ConditionKind
    indices: tuple[PositiveInt, ...]
    lhs_rank: NonNegativeInt
    rhs_ranks: list[NonNegativeInt]
    rhs_rank: NonNegativeInt
    holds: bool

    @property
    def condition(self) -> ConditionId:
        return ConditionId(kind=self.kind, indices=self.indices)


class SolvabilityReport(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    version: Literal[1] = 1
    rel_tol: float = Field(..., gt=0.0)
    entries: list[ConditionEntry]
    overall: bool

    @model_validator(mode="after")
    def _overall_is_conjunction(self) -> SolvabilityReport:
        if self.overall != all(entry.holds for entry in self.entries):
            raise ValueError("overall must equal the conjunction of the entries")
        return self

    def failing(self) -> list[ConditionEntry]:
        return [entry for entry in self.entries if not entry.holds]


class MatrixPayload(BaseModel):
    """``data`` is row-major nested arrays of ``[w, x, y, z]`` quadruples."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    rows: NonNegativeInt
    cols: NonNegativeInt
    data: list[list[tuple[float, float, float, float]]]

    @model_validator(mode="after")
    def _check_layout(self) -> MatrixPayload:
        if len(self.data) != self.rows:
            raise ValueError(f"data has {len(self.data)} rows, expected {self.rows}")
        for p, row in enumerate(self.data):
            if len(row) != self.cols:
                raise ValueError(f"data row {p} has {len(row)} entries, expected {self.cols}")
            if not all(math.isfinite(c) for entry in row for c in entry):
                raise ValueError(f"data row {p} holds a non-finite number")
        return self


class ChainEquationPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A: MatrixPayload
    B: MatrixPayload
    C: MatrixPayload
    D: MatrixPayload
    E: MatrixPayload


class EtaEquationPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A: MatrixPayload
    C: MatrixPayload
    E: MatrixPayload


class ChainProblemFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1]
    kind: Literal["chain"]
    k: PositiveInt
    equations: list[ChainEquationPayload]


class EtaProblemFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1]
    kind: Literal["eta"]
    k: PositiveInt
    eta: EtaUnit
    equations: list[EtaEquationPayload]


class SolutionFile(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    version: Literal[1] = 1
    kind: Literal["chain", "eta"] = "chain"
    X: list[MatrixPayload]
    residuals: list[float]
    max_residual: float
    rel_tol: float = Field(..., gt=0.0)
    seed: NonNegativeInt | None = None


class OracleReport(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    version: Literal[1] = 1
    consistent: bool
    residual: float
    real_unknowns: NonNegativeInt
    real_equations: NonNegativeInt


class VerifyReport(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    version: Literal[1] = 1
    verified: bool
    residuals: list[float]
    max_residual: float
    residual_tol: float
