"""The single two-sided equation ``A X1 B + C X2 D = E`` and the one-sided ``P U + V Q = G``.

Solvability is decided two ways (projector products and rank equalities) and a
solution is produced from the closed-form general solution with five free
parameter matrices.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from qsylv.core.config import get_settings
from qsylv.core.errors import DimError, Inconsistent, PairingViolation
from qsylv.models.schemas import ConditionEntry, ConditionId, ConditionKind
from qsylv.services.numlin import (
    RankPolicy,
    block_matrix,
    drop_roundoff,
    pinv,
    proj_L,
    proj_R,
    rank,
)
from qsylv.services.quat_core import QMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SingleEquation:
    """``A`` p x q, ``B`` r x s, ``C`` p x t, ``D`` u x s, ``E`` p x s; X1 is q x r, X2 is t x u."""

    A: QMatrix
    B: QMatrix
    C: QMatrix
    D: QMatrix
    E: QMatrix

    def validate(self, label: str = "equation") -> None:
        p, s = self.E.shape
        checks = (
            (self.A.rows, p, "A rows", "E rows"),
            (self.C.rows, p, "C rows", "E rows"),
            (self.B.cols, s, "B cols", "E cols"),
            (self.D.cols, s, "D cols", "E cols"),
        )
        for got, expected, name, against in checks:
            if got != expected:
                raise DimError(f"{label}: {name} {got} != {against} {expected}")

    @property
    def x1_shape(self) -> tuple[int, int]:
        return self.A.cols, self.B.rows

    @property
    def x2_shape(self) -> tuple[int, int]:
        return self.C.cols, self.D.rows

    def apply(self, X1: QMatrix, X2: QMatrix) -> QMatrix:
        return self.A @ X1 @ self.B + self.C @ X2 @ self.D

    def residual(self, X1: QMatrix, X2: QMatrix) -> float:
        """Frobenius residual scaled by ``1 + ||E||``."""
        return (self.apply(X1, X2) - self.E).frobenius_norm() / (1.0 + self.E.frobenius_norm())


@dataclass(frozen=True)
class SingleParams:
    """Free parameters of the general solution; zero gives the particular solution."""

    Y1: QMatrix
    Y2: QMatrix
    Y3: QMatrix
    Y4: QMatrix
    Y5: QMatrix

    @classmethod
    def zeros(cls, eq: SingleEquation) -> SingleParams:
        x1, x2 = eq.x1_shape, eq.x2_shape
        return cls(
            Y1=QMatrix.zeros(*x2),
            Y2=QMatrix.zeros(*x1),
            Y3=QMatrix.zeros(*x1),
            Y4=QMatrix.zeros(*x2),
            Y5=QMatrix.zeros(*x2),
        )

    @classmethod
    def random(cls, eq: SingleEquation, rng: np.random.Generator) -> SingleParams:
        x1, x2 = eq.x1_shape, eq.x2_shape
        return cls(
            Y1=QMatrix.random(rng, *x2),
            Y2=QMatrix.random(rng, *x1),
            Y3=QMatrix.random(rng, *x1),
            Y4=QMatrix.random(rng, *x2),
            Y5=QMatrix.random(rng, *x2),
        )


@dataclass(frozen=True)
class SingleContext:
    """Pseudoinverses and projectors of one equation, built once per call.

    ``M = R_A C``, ``N = D L_B``, ``S = C L_M``.
    """

    eq: SingleEquation
    A_pinv: QMatrix
    B_pinv: QMatrix
    C_pinv: QMatrix
    D_pinv: QMatrix
    M: QMatrix
    N: QMatrix
    S: QMatrix
    M_pinv: QMatrix
    N_pinv: QMatrix
    S_pinv: QMatrix
    L_A: QMatrix
    R_A: QMatrix
    L_B: QMatrix
    R_B: QMatrix
    R_C: QMatrix
    L_D: QMatrix
    R_D: QMatrix
    L_M: QMatrix
    R_M: QMatrix
    L_S: QMatrix
    L_N: QMatrix
    R_N: QMatrix

    @classmethod
    def build(cls, eq: SingleEquation, policy: RankPolicy | None = None) -> SingleContext:
        policy = _resolve(policy)
        A, B, C, D = eq.A, eq.B, eq.C, eq.D
        A_pinv, B_pinv = pinv(A, policy).pinv, pinv(B, policy).pinv
        C_pinv, D_pinv = pinv(C, policy).pinv, pinv(D, policy).pinv
        R_A, L_B = proj_R(A, policy), proj_L(B, policy)
        M = drop_roundoff(R_A @ C, [R_A, C], policy)
        N = drop_roundoff(D @ L_B, [D, L_B], policy)
        M_pinv, N_pinv = pinv(M, policy).pinv, pinv(N, policy).pinv
        L_M = proj_L(M, policy)
        S = drop_roundoff(C @ L_M, [C, L_M], policy)
        return cls(
            eq=eq,
            A_pinv=A_pinv,
            B_pinv=B_pinv,
            C_pinv=C_pinv,
            D_pinv=D_pinv,
            M=M,
            N=N,
            S=S,
            M_pinv=M_pinv,
            N_pinv=N_pinv,
            S_pinv=pinv(S, policy).pinv,
            L_A=proj_L(A, policy),
            R_A=R_A,
            L_B=L_B,
            R_B=proj_R(B, policy),
            R_C=proj_R(C, policy),
            L_D=proj_L(D, policy),
            R_D=proj_R(D, policy),
            L_M=L_M,
            R_M=proj_R(M, policy),
            L_S=proj_L(S, policy),
            L_N=proj_L(N, policy),
            R_N=proj_R(N, policy),
        )

    def first_unknown(
        self, Y1: QMatrix | None = None, Y2: QMatrix | None = None, Y3: QMatrix | None = None
    ) -> QMatrix:
        """X1 of the general solution; omitted parameters are zero."""
        A_pinv, B_pinv, E = self.A_pinv, self.B_pinv, self.eq.E
        X1 = (
            A_pinv @ E @ B_pinv
            - A_pinv @ self.eq.C @ self.M_pinv @ E @ B_pinv
            - A_pinv @ self.S @ self.C_pinv @ E @ self.N_pinv @ self.eq.D @ B_pinv
        )
        if Y1 is not None:
            X1 = X1 - A_pinv @ self.S @ Y1 @ self.R_N @ self.eq.D @ B_pinv
        if Y2 is not None:
            X1 = X1 + self.L_A @ Y2
        if Y3 is not None:
            X1 = X1 + Y3 @ self.R_B
        return X1

    def second_unknown(
        self, Y1: QMatrix | None = None, Y4: QMatrix | None = None, Y5: QMatrix | None = None
    ) -> QMatrix:
        """X2 of the general solution; omitted parameters are zero."""
        E = self.eq.E
        X2 = self.M_pinv @ E @ self.D_pinv + self.S_pinv @ self.S @ self.C_pinv @ E @ self.N_pinv
        if Y1 is not None:
            X2 = X2 + self.L_M @ Y1 @ self.R_N
        if Y4 is not None:
            X2 = X2 + self.L_M @ self.L_S @ Y4
        if Y5 is not None:
            X2 = X2 + Y5 @ self.R_D
        return X2

    def solution(self, params: SingleParams | None = None) -> tuple[QMatrix, QMatrix]:
        if params is None:
            return self.first_unknown(), self.second_unknown()
        return (
            self.first_unknown(params.Y1, params.Y2, params.Y3),
            self.second_unknown(params.Y1, params.Y4, params.Y5),
        )


@dataclass(frozen=True)
class ProjectorCheck:
    holds: bool
    residuals: dict[str, float]
    tolerance: float


def _resolve(policy: RankPolicy | None) -> RankPolicy:
    return policy if policy is not None else RankPolicy.from_settings()


def rank_entry(
    condition: ConditionId,
    lhs: QMatrix,
    rhs_parts: Sequence[QMatrix],
    policy: RankPolicy,
) -> ConditionEntry:
    """Evaluate ``r(lhs) == sum r(rhs_parts)`` as an exact integer comparison."""
    try:
        lhs_rank = rank(lhs, policy)
        rhs_ranks = [rank(part, policy) for part in rhs_parts]
    except PairingViolation as exc:
        raise exc.at(condition) from exc
    rhs_rank = sum(rhs_ranks)
    return ConditionEntry(
        kind=condition.kind,
        indices=condition.indices,
        lhs_rank=lhs_rank,
        rhs_ranks=rhs_ranks,
        rhs_rank=rhs_rank,
        holds=lhs_rank == rhs_rank,
    )


def single_condition_matrices(
    eq: SingleEquation, kind: ConditionKind
) -> tuple[QMatrix, list[QMatrix]]:
    A, B, C, D, E = eq.A, eq.B, eq.C, eq.D, eq.E
    p, s = E.shape
    q, r, t, u = A.cols, B.rows, C.cols, D.rows
    if kind is ConditionKind.ROW:
        return (
            block_matrix([[A, E, C]], [p], [q, s, t]),
            [block_matrix([[A, C]], [p], [q, t])],
        )
    if kind is ConditionKind.COL:
        return (
            block_matrix([[B], [E], [D]], [r, p, u], [s]),
            [block_matrix([[B], [D]], [r, u], [s])],
        )
    if kind is ConditionKind.AD:
        return block_matrix([[A, E], [None, D]], [p, u], [q, s]), [A, D]
    if kind is ConditionKind.BC:
        return block_matrix([[B, None], [E, C]], [r, p], [s, t]), [B, C]
    raise ValueError(f"{kind.value} is not a single-equation condition")


def check_single_rank(
    eq: SingleEquation, policy: RankPolicy | None = None, index: int = 1
) -> list[ConditionEntry]:
    """The four rank equalities deciding consistency of one equation."""
    policy = _resolve(policy)
    eq.validate()
    entries = []
    for kind in (ConditionKind.ROW, ConditionKind.COL, ConditionKind.AD, ConditionKind.BC):
        lhs, rhs_parts = single_condition_matrices(eq, kind)
        entries.append(rank_entry(ConditionId.single(kind, index), lhs, rhs_parts, policy))
    return entries


def check_single_projector(eq: SingleEquation, policy: RankPolicy | None = None) -> ProjectorCheck:
    """Consistency through the four projector products, each compared against ``||E||``."""
    policy = _resolve(policy)
    eq.validate()
    ctx = SingleContext.build(eq, policy)
    E = eq.E
    products = {
        "R_M R_A E": ctx.R_M @ ctx.R_A @ E,
        "E L_B L_N": E @ ctx.L_B @ ctx.L_N,
        "R_A E L_D": ctx.R_A @ E @ ctx.L_D,
        "R_C E L_B": ctx.R_C @ E @ ctx.L_B,
    }
    residuals = {name: product.frobenius_norm() for name, product in products.items()}
    tolerance = policy.rel_tol * max(E.rows, E.cols, 1) * E.frobenius_norm()
    holds = all(value <= tolerance for value in residuals.values())
    return ProjectorCheck(holds=holds, residuals=residuals, tolerance=tolerance)


def solve_single(
    eq: SingleEquation,
    params: SingleParams | None = None,
    policy: RankPolicy | None = None,
) -> tuple[QMatrix, QMatrix]:
    policy = _resolve(policy)
    failing = [entry for entry in check_single_rank(eq, policy) if not entry.holds]
    if failing:
        condition = failing[0].condition
        raise Inconsistent(f"equation is inconsistent: {condition.label()} fails", condition=condition)
    return SingleContext.build(eq, policy).solution(params)


def solve_two_block(
    P: QMatrix,
    Q: QMatrix,
    G: QMatrix,
    policy: RankPolicy | None = None,
    tol: float | None = None,
) -> tuple[QMatrix, QMatrix]:
    """Particular solution ``U = P^dagger G``, ``V = R_P G Q^dagger`` of ``P U + V Q = G``."""
    if P.rows != G.rows:
        raise DimError(f"P rows {P.rows} != G rows {G.rows}")
    if Q.cols != G.cols:
        raise DimError(f"Q cols {Q.cols} != G cols {G.cols}")
    policy = _resolve(policy)
    tol = tol if tol is not None else get_settings().residual_tol
    P_pinv, Q_pinv = pinv(P, policy).pinv, pinv(Q, policy).pinv
    R_P, L_Q = proj_R(P, policy), proj_L(Q, policy)
    gap = (R_P @ G @ L_Q).frobenius_norm()
    if gap > tol * (1.0 + G.frobenius_norm()):
        raise Inconsistent(f"P U + V Q = G is inconsistent: ||R_P G L_Q|| = {gap:.3e}", residual=gap)
    return P_pinv @ G, R_P @ G @ Q_pinv


def solve_one_sided(
    A: QMatrix, D: QMatrix, E: QMatrix, policy: RankPolicy | None = None
) -> tuple[QMatrix, QMatrix]:
    """``A X1 + X2 D = E``; consistent iff ``R_A E L_D = 0``."""
    return solve_two_block(A, D, E, policy)
