"""JSON problem and solution files: strict parsing and canonical serialization."""
from __future__ import annotations

import json
from collections.abc import Sequence
from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from qsylv.core.errors import ParseError
from qsylv.models.schemas import (
    ChainEquationPayload,
    ChainProblemFile,
    EtaEquationPayload,
    EtaProblemFile,
    MatrixPayload,
    SolutionFile,
)
from qsylv.services.chain_solver import ChainSolution, ChainSystem
from qsylv.services.eta_hermitian import EtaChainSystem, EtaEquation
from qsylv.services.quat_core import QMatrix
from qsylv.services.sylvester_single import SingleEquation

ProblemFile = Annotated[ChainProblemFile | EtaProblemFile, Field(discriminator="kind")]

_PROBLEM_ADAPTER: TypeAdapter[ChainProblemFile | EtaProblemFile] = TypeAdapter(ProblemFile)

_KIND_TAGS = ("chain", "eta")


def _pointer(loc: Sequence[Any]) -> str:
    return "".join(f"/{part}" for part in loc)


def _parse_error(exc: ValidationError, *, tagged: bool = False) -> ParseError:
    error = exc.errors()[0]
    loc = list(error["loc"])
    if error["type"] in ("union_tag_not_found", "union_tag_invalid"):
        return ParseError("/kind", error["msg"])
    if tagged and loc and loc[0] in _KIND_TAGS:
        loc = loc[1:]
    return ParseError(_pointer(loc), error["msg"])


def matrix_to_payload(matrix: QMatrix) -> MatrixPayload:
    return MatrixPayload(rows=matrix.rows, cols=matrix.cols, data=matrix.to_nested())


def payload_to_matrix(payload: MatrixPayload) -> QMatrix:
    data = np.array(payload.data, dtype=np.float64).reshape(payload.rows, payload.cols, 4)
    return QMatrix(data)


def parse_problem(raw: bytes | str) -> ChainProblemFile | EtaProblemFile:
    try:
        problem = _PROBLEM_ADAPTER.validate_json(raw)
    except ValidationError as exc:
        raise _parse_error(exc, tagged=True) from exc
    if len(problem.equations) != problem.k:
        raise ParseError("/k", f"k is {problem.k} but {len(problem.equations)} equations are given")
    return problem


def parse_solution(raw: bytes | str) -> SolutionFile:
    try:
        return SolutionFile.model_validate_json(raw)
    except ValidationError as exc:
        raise _parse_error(exc) from exc


def serialize(model: BaseModel) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def chain_system(problem: ChainProblemFile) -> ChainSystem:
    return ChainSystem(
        tuple(
            SingleEquation(*(payload_to_matrix(getattr(eq, name)) for name in "ABCDE"))
            for eq in problem.equations
        )
    )


def eta_system(problem: EtaProblemFile) -> EtaChainSystem:
    return EtaChainSystem(
        problem.eta,
        tuple(
            EtaEquation(*(payload_to_matrix(getattr(eq, name)) for name in "ACE"))
            for eq in problem.equations
        ),
    )


def chain_problem_file(system: ChainSystem) -> ChainProblemFile:
    equations = [
        ChainEquationPayload(
            **{name: matrix_to_payload(getattr(eq, name)) for name in "ABCDE"}
        )
        for eq in system.equations
    ]
    return ChainProblemFile(version=1, kind="chain", k=system.k, equations=equations)


def eta_problem_file(system: EtaChainSystem) -> EtaProblemFile:
    equations = [
        EtaEquationPayload(**{name: matrix_to_payload(getattr(eq, name)) for name in "ACE"})
        for eq in system.equations
    ]
    return EtaProblemFile(version=1, kind="eta", k=system.k, eta=system.eta, equations=equations)


def solution_file(solution: ChainSolution, kind: str, rel_tol: float) -> SolutionFile:
    return SolutionFile(
        kind=kind,
        X=[matrix_to_payload(matrix) for matrix in solution.X],
        residuals=list(solution.residuals),
        max_residual=solution.max_residual,
        rel_tol=rel_tol,
        seed=solution.seed,
    )


def solution_matrices(solution: SolutionFile) -> list[QMatrix]:
    return [payload_to_matrix(payload) for payload in solution.X]
