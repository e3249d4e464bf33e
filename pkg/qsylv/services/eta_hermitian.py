"""η-Hermitian solutions of ``A_i X_i A_i^{η*} + C_i X_{i+1} C_i^{η*} = E_i``.

The constrained system is solved through the unconstrained chain with
``B_i = A_i^{η*}`` and ``D_i = C_i^{η*}``; averaging a chain solution with its
η-conjugate transpose gives an η-Hermitian one.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from qsylv.core.errors import DimError, NotEtaHermitianRHS
from qsylv.models.schemas import ConditionEntry, ConditionId, ConditionKind, SolvabilityReport
from qsylv.services.chain_solver import (
    ChainSolution,
    ChainSystem,
    DimsSpec,
    GenerateMode,
    GenerateStyle,
    coefficient_band_ac,
    evaluate_conditions,
    random_coefficient,
    solve_chain,
    staircase,
    validate,
)
from qsylv.services.numlin import RankPolicy
from qsylv.services.quat_core import EtaUnit, QMatrix
from qsylv.services.sylvester_single import SingleEquation, rank_entry

logger = logging.getLogger(__name__)

ETA_HERMITIAN_TOL = 1e-10

# kind -> (staircase shape of the chain form, A/C bands whose ranks are summed)
_ETA_SHAPES: dict[ConditionKind, tuple[tuple[bool, bool, bool, bool], tuple[tuple[bool, bool], ...]]] = {
    ConditionKind.ETA_ROW: ((True, False, True, False), ((True, True), (False, False))),
    ConditionKind.ETA_AD: ((True, False, False, True), ((True, False), (False, True))),
    ConditionKind.ETA_STAIR_ROW: ((True, False, True, False), ((True, True), (False, False))),
    ConditionKind.ETA_STAIR_AD: ((True, False, False, True), ((True, False), (False, True))),
}


@dataclass(frozen=True)
class EtaEquation:
    A: QMatrix
    C: QMatrix
    E: QMatrix


@dataclass(frozen=True)
class EtaChainSystem:
    eta: EtaUnit
    equations: tuple[EtaEquation, ...]

    @property
    def k(self) -> int:
        return len(self.equations)

    def residuals(self, X: Sequence[QMatrix]) -> list[float]:
        return as_chain(self).residuals(X)


def eta_hermitian_residual(A: QMatrix, eta: EtaUnit) -> float:
    """``||A - A^{η*}||`` relative to ``max(1, ||A||)``; infinite for non-square A."""
    if A.rows != A.cols:
        return float("inf")
    return (A - A.eta_conj_transpose(eta)).frobenius_norm() / max(1.0, A.frobenius_norm())


def validate_eta(system: EtaChainSystem) -> None:
    if system.k == 0:
        raise DimError("a chain needs at least one equation")
    for index, eq in enumerate(system.equations, start=1):
        p = eq.E.rows
        if eq.E.cols != p:
            raise DimError(f"equation {index}: E is {eq.E.rows}x{eq.E.cols}, expected square")
        if eq.A.rows != p:
            raise DimError(f"equation {index}: A rows {eq.A.rows} != E rows {p}")
        if eq.C.rows != p:
            raise DimError(f"equation {index}: C rows {eq.C.rows} != E rows {p}")
        if index > 1 and eq.A.cols != system.equations[index - 2].C.cols:
            raise DimError(f"q_{index} != t_{index - 1}")
        residual = eta_hermitian_residual(eq.E, system.eta)
        if residual > ETA_HERMITIAN_TOL:
            raise NotEtaHermitianRHS(index, residual)


def as_chain(system: EtaChainSystem) -> ChainSystem:
    """Drop the η-Hermitian constraint: ``B_i = A_i^{η*}``, ``D_i = C_i^{η*}``."""
    validate_eta(system)
    eta = system.eta
    chain = ChainSystem(
        tuple(
            SingleEquation(eq.A, eq.A.eta_conj_transpose(eta), eq.C, eq.C.eta_conj_transpose(eta), eq.E)
            for eq in system.equations
        )
    )
    validate(chain)
    return chain


def eta_condition_ids(k: int) -> list[ConditionId]:
    ids = [
        ConditionId.single(kind, i)
        for i in range(1, k + 1)
        for kind in (ConditionKind.ETA_ROW, ConditionKind.ETA_AD)
    ]
    ids.extend(
        ConditionId.pair(kind, m, n)
        for m in range(1, k + 1)
        for n in range(m + 1, k + 1)
        for kind in (ConditionKind.ETA_STAIR_ROW, ConditionKind.ETA_STAIR_AD)
    )
    return ids


def build_eta_condition(
    chain: ChainSystem, condition: ConditionId
) -> tuple[QMatrix, list[QMatrix]]:
    """Condition matrices of the η form; ``chain`` is the output of ``as_chain``."""
    try:
        (lead_a, lead_b, trail_c, trail_d), bands = _ETA_SHAPES[condition.kind]
    except KeyError:
        raise ValueError(f"{condition.kind.value} is not an η condition") from None
    m, n = (index - 1 for index in condition.window)
    eqs = chain.equations
    lhs = staircase(eqs, m, n, lead_a=lead_a, lead_b=lead_b, trail_c=trail_c, trail_d=trail_d)
    rhs = [coefficient_band_ac(eqs, m, n, lead_a=a, trail_c=c) for a, c in bands]
    return lhs, [part for part in rhs if not part.is_empty]


def check_eta(system: EtaChainSystem, policy: RankPolicy | None = None) -> SolvabilityReport:
    policy = policy if policy is not None else RankPolicy.from_settings()
    chain = as_chain(system)

    def evaluate(cid: ConditionId) -> ConditionEntry:
        lhs, rhs = build_eta_condition(chain, cid)
        return rank_entry(cid, lhs, rhs, policy)

    entries = evaluate_conditions(eta_condition_ids(system.k), evaluate)
    return SolvabilityReport(
        rel_tol=policy.rel_tol, entries=entries, overall=all(e.holds for e in entries)
    )


def symmetrize(Y: QMatrix, eta: EtaUnit) -> QMatrix:
    return (Y + Y.eta_conj_transpose(eta)) * 0.5


def solve_eta(
    system: EtaChainSystem,
    policy: RankPolicy | None = None,
    seed: int | None = None,
    residual_tol: float | None = None,
) -> ChainSolution:
    """η-Hermitian X_1..X_{k+1}: a chain solution averaged with its η-conjugate transpose."""
    chain = as_chain(system)
    unconstrained = solve_chain(chain, policy, seed=seed, residual_tol=residual_tol)
    X = tuple(symmetrize(Y, system.eta) for Y in unconstrained.X)
    residuals = chain.residuals(X)
    logger.debug(
        "eta=%s k=%d: unconstrained residual %.3e, averaged residual %.3e",
        system.eta.value,
        system.k,
        unconstrained.max_residual,
        max(residuals),
    )
    return ChainSolution(X, tuple(residuals), max(residuals), seed)


def random_eta_hermitian(rng: np.random.Generator, n: int, eta: EtaUnit) -> QMatrix:
    return symmetrize(QMatrix.random(rng, n, n), eta)


@dataclass(frozen=True)
class GeneratedEtaChain:
    system: EtaChainSystem
    X: tuple[QMatrix, ...]
    perturbed: int | None = None


def generate_eta_instance(
    dims: DimsSpec,
    k: int,
    seed: int,
    eta: EtaUnit,
    mode: GenerateMode = "consistent",
    style: GenerateStyle = "generic",
) -> GeneratedEtaChain:
    """Forward construction from random η-Hermitian unknowns."""
    if k < 1:
        raise DimError(f"k must be positive, got {k}")
    rng = np.random.default_rng(seed)

    def draw() -> int:
        if isinstance(dims, int):
            return dims
        return int(rng.integers(dims[0], dims[1] + 1))

    unknown = [draw() for _ in range(k + 1)]
    outer = [draw() for _ in range(k)]
    X = tuple(random_eta_hermitian(rng, q, eta) for q in unknown)
    equations = []
    for i, p in enumerate(outer):
        A = random_coefficient(rng, p, unknown[i], style)
        C = random_coefficient(rng, p, unknown[i + 1], style)
        E = A @ X[i] @ A.eta_conj_transpose(eta) + C @ X[i + 1] @ C.eta_conj_transpose(eta)
        # exact symmetry so validation sees zero residual
        equations.append(EtaEquation(A, C, symmetrize(E, eta)))
    perturbed = None
    if mode == "perturbed":
        perturbed = int(rng.integers(k))
        eq = equations[perturbed]
        noise = random_eta_hermitian(rng, eq.E.rows, eta)
        equations[perturbed] = EtaEquation(eq.A, eq.C, eq.E + noise)
    elif mode != "consistent":
        raise ValueError(f"unknown generation mode {mode!r}")
    return GeneratedEtaChain(EtaChainSystem(eta, tuple(equations)), X, perturbed)


def generate_eta(
    dims: DimsSpec,
    k: int,
    seed: int,
    eta: EtaUnit,
    mode: GenerateMode = "consistent",
    style: GenerateStyle = "generic",
) -> EtaChainSystem:
    return generate_eta_instance(dims, k, seed, eta, mode, style).system
