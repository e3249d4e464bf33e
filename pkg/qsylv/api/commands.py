"""Subcommand handlers; each returns the document to write and the exit code.

Exit codes: 0 consistent / solved / verified, 1 inconsistent (the document is
still written), 2 input or usage error (raised, mapped by the entry point).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from pydantic import BaseModel

from qsylv.api import codec
from qsylv.core.config import get_settings
from qsylv.core.errors import Inconsistent, ParseError
from qsylv.models.schemas import (
    ChainProblemFile,
    EtaProblemFile,
    OracleReport,
    SolvabilityReport,
    VerifyReport,
)
from qsylv.services.chain_solver import (
    ChainSystem,
    DimsSpec,
    GenerateMode,
    GenerateStyle,
    check_chain,
    generate,
    solve_chain,
)
from qsylv.services.eta_hermitian import (
    ETA_HERMITIAN_TOL,
    as_chain,
    check_eta,
    eta_hermitian_residual,
    generate_eta,
    solve_eta,
)
from qsylv.services.numlin import RankPolicy
from qsylv.services.oracle_testkit import oracle_verdict
from qsylv.services.quat_core import EtaUnit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INCONSISTENT = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    document: BaseModel
    message: str | None = None


def _summarize_failures(report: SolvabilityReport) -> str:
    failing = report.failing()
    labels = ", ".join(
        f"{entry.condition.label()} ({entry.lhs_rank} != {entry.rhs_rank})" for entry in failing
    )
    return f"{len(failing)} of {len(report.entries)} conditions fail: {labels}"


def _report_result(report: SolvabilityReport) -> CommandResult:
    if report.overall:
        return CommandResult(EXIT_OK, report)
    return CommandResult(EXIT_INCONSISTENT, report, _summarize_failures(report))


def _chain_of(problem: ChainProblemFile | EtaProblemFile) -> ChainSystem:
    """The unconstrained chain of either file kind."""
    if isinstance(problem, EtaProblemFile):
        return as_chain(codec.eta_system(problem))
    return codec.chain_system(problem)


def _require_eta(problem: ChainProblemFile | EtaProblemFile) -> EtaProblemFile:
    if not isinstance(problem, EtaProblemFile):
        raise ParseError("/kind", "expected an eta problem")
    return problem


def check(raw: bytes, policy: RankPolicy) -> CommandResult:
    report = check_chain(_chain_of(codec.parse_problem(raw)), policy)
    logger.info("check: overall %s over %d conditions", report.overall, len(report.entries))
    return _report_result(report)


def solve(raw: bytes, policy: RankPolicy, seed: int | None = None) -> CommandResult:
    system = _chain_of(codec.parse_problem(raw))
    try:
        solution = solve_chain(system, policy, seed=seed)
    except Inconsistent as exc:
        report = check_chain(system, policy)
        return CommandResult(EXIT_INCONSISTENT, report, str(exc))
    logger.info("solve: max residual %.3e", solution.max_residual)
    return CommandResult(EXIT_OK, codec.solution_file(solution, "chain", policy.rel_tol))


def eta_check(raw: bytes, policy: RankPolicy) -> CommandResult:
    problem = _require_eta(codec.parse_problem(raw))
    report = check_eta(codec.eta_system(problem), policy)
    logger.info("eta-check: overall %s over %d conditions", report.overall, len(report.entries))
    return _report_result(report)


def eta_solve(raw: bytes, policy: RankPolicy, seed: int | None = None) -> CommandResult:
    system = codec.eta_system(_require_eta(codec.parse_problem(raw)))
    try:
        solution = solve_eta(system, policy, seed=seed)
    except Inconsistent as exc:
        return CommandResult(EXIT_INCONSISTENT, check_eta(system, policy), str(exc))
    logger.info("eta-solve: max residual %.3e", solution.max_residual)
    return CommandResult(EXIT_OK, codec.solution_file(solution, "eta", policy.rel_tol))


def gen(
    k: int,
    dims: DimsSpec,
    seed: int,
    mode: GenerateMode = "consistent",
    style: GenerateStyle = "generic",
    eta: EtaUnit | None = None,
) -> CommandResult:
    if eta is not None:
        document: BaseModel = codec.eta_problem_file(generate_eta(dims, k, seed, eta, mode, style))
    else:
        document = codec.chain_problem_file(generate(dims, k, seed, mode, style))
    return CommandResult(EXIT_OK, document)


def verify(problem_raw: bytes, solution_raw: bytes, tol: float | None = None) -> CommandResult:
    problem = codec.parse_problem(problem_raw)
    solution = codec.parse_solution(solution_raw)
    tol = tol if tol is not None else get_settings().residual_tol
    X = codec.solution_matrices(solution)
    residuals = _chain_of(problem).residuals(X)
    max_residual = max(residuals)
    verified = max_residual <= tol
    message = None
    if isinstance(problem, EtaProblemFile):
        worst = max(eta_hermitian_residual(matrix, problem.eta) for matrix in X)
        if worst > ETA_HERMITIAN_TOL:
            verified = False
            message = f"solution is not eta-Hermitian (residual {worst:.3e})"
    if max_residual > tol:
        message = f"max residual {max_residual:.3e} exceeds {tol:.1e}"
    report = VerifyReport(
        verified=verified, residuals=residuals, max_residual=max_residual, residual_tol=tol
    )
    return CommandResult(EXIT_OK if verified else EXIT_INCONSISTENT, report, message)


def oracle(raw: bytes, policy: RankPolicy, tol: float | None = None) -> CommandResult:
    verdict = oracle_verdict(_chain_of(codec.parse_problem(raw)), tol, policy)
    linearization = verdict.linearization
    report = OracleReport(
        consistent=verdict.consistent,
        residual=verdict.residual,
        real_unknowns=linearization.unknowns,
        real_equations=linearization.equations,
    )
    if verdict.consistent:
        return CommandResult(EXIT_OK, report)
    return CommandResult(
        EXIT_INCONSISTENT, report, f"least-squares residual {verdict.residual:.3e}"
    )
