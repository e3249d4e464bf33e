"""The coupled chain ``A_i X_i B_i + C_i X_{i+1} D_i = E_i`` for i = 1..k.

Consistency is certified by 2k(k+1) block-matrix rank equalities. Solutions are
built by induction: every equation is solved on its own, the coupling between
neighbouring solutions becomes a chain with one equation fewer in the free
parameters, and the recursion bottoms out at a single equation.
"""
from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from qsylv.core.config import get_settings
from qsylv.core.errors import DimError, Inconsistent, PerEquationInconsistent
from qsylv.models.schemas import ConditionEntry, ConditionId, ConditionKind, SolvabilityReport
from qsylv.services.numlin import (
    RankPolicy,
    block_matrix,
    drop_roundoff,
    proj_L,
    proj_R,
    rank,
)
from qsylv.services.quat_core import QMatrix, hstack, vstack
from qsylv.services.sylvester_single import (
    SingleContext,
    SingleEquation,
    SingleParams,
    check_single_rank,
    rank_entry,
    solve_two_block,
)

logger = logging.getLogger(__name__)

GenerateMode = Literal["consistent", "perturbed"]
GenerateStyle = Literal["generic", "rank_deficient", "zero_blocks", "mixed"]
DimsSpec = int | tuple[int, int]

SINGLE_KINDS = (ConditionKind.ROW, ConditionKind.COL, ConditionKind.AD, ConditionKind.BC)
PAIR_KINDS = (
    ConditionKind.STAIR_ROW,
    ConditionKind.STAIR_COL,
    ConditionKind.STAIR_AD,
    ConditionKind.STAIR_BC,
)

# (leading A column, leading B row, trailing C column, trailing D row)
STAIRCASE_SHAPES: dict[ConditionKind, tuple[bool, bool, bool, bool]] = {
    ConditionKind.ROW: (True, False, True, False),
    ConditionKind.STAIR_ROW: (True, False, True, False),
    ConditionKind.COL: (False, True, False, True),
    ConditionKind.STAIR_COL: (False, True, False, True),
    ConditionKind.AD: (True, False, False, True),
    ConditionKind.STAIR_AD: (True, False, False, True),
    ConditionKind.BC: (False, True, True, False),
    ConditionKind.STAIR_BC: (False, True, True, False),
}


@dataclass(frozen=True)
class ChainSystem:
    equations: tuple[SingleEquation, ...]

    @property
    def k(self) -> int:
        return len(self.equations)

    def unknown_shapes(self) -> list[tuple[int, int]]:
        """Shapes of X_1..X_{k+1}."""
        shapes = [eq.x1_shape for eq in self.equations]
        shapes.append(self.equations[-1].x2_shape)
        return shapes

    def residuals(self, X: Sequence[QMatrix]) -> list[float]:
        if len(X) != self.k + 1:
            raise DimError(f"expected {self.k + 1} unknowns, got {len(X)}")
        for index, (got, expected) in enumerate(zip(X, self.unknown_shapes(), strict=True), start=1):
            if got.shape != expected:
                raise DimError(f"X_{index} is {got.rows}x{got.cols}, expected {expected[0]}x{expected[1]}")
        return [eq.residual(X[i], X[i + 1]) for i, eq in enumerate(self.equations)]


@dataclass(frozen=True)
class ChainSolution:
    X: tuple[QMatrix, ...]
    residuals: tuple[float, ...]
    max_residual: float
    seed: int | None = None


def validate(system: ChainSystem) -> None:
    """Raise DimError naming the first violated shape or coupling constraint."""
    if system.k == 0:
        raise DimError("a chain needs at least one equation")
    for index, eq in enumerate(system.equations, start=1):
        eq.validate(f"equation {index}")
    for index in range(1, system.k):
        eq, nxt = system.equations[index - 1], system.equations[index]
        if nxt.A.cols != eq.C.cols:
            raise DimError(f"q_{index + 1} != t_{index} ({nxt.A.cols} vs {eq.C.cols})")
        if nxt.B.rows != eq.D.rows:
            raise DimError(f"r_{index + 1} != u_{index} ({nxt.B.rows} vs {eq.D.rows})")


def condition_ids(k: int) -> list[ConditionId]:
    ids = [ConditionId.single(kind, i) for i in range(1, k + 1) for kind in SINGLE_KINDS]
    ids.extend(
        ConditionId.pair(kind, m, n)
        for m in range(1, k + 1)
        for n in range(m + 1, k + 1)
        for kind in PAIR_KINDS
    )
    return ids


# -- staircase matrices ----------------------------------------------------


def staircase(
    eqs: Sequence[SingleEquation],
    m: int,
    n: int,
    *,
    lead_a: bool,
    lead_b: bool,
    trail_c: bool,
    trail_d: bool,
) -> QMatrix:
    """Staircase over the 0-based window m..n; E blocks alternate in sign from E_m.

    Equation l contributes a row band holding ``A_l, (+-)E_l, C_l`` and, except
    at the bottom unless ``trail_d``, a row band holding ``D_l, B_{l+1}``.
    """
    row_dims: list[int] = []
    col_dims: list[int] = []
    cells: dict[tuple[int, int], QMatrix] = {}
    a_col: dict[int, int] = {}
    c_col: dict[int, int] = {}
    s_col: dict[int, int] = {}

    if lead_a:
        a_col[m] = len(col_dims)
        col_dims.append(eqs[m].A.cols)
    for l in range(m, n + 1):
        s_col[l] = len(col_dims)
        col_dims.append(eqs[l].E.cols)
        if l < n or trail_c:
            c_col[l] = len(col_dims)
            col_dims.append(eqs[l].C.cols)
            if l < n:
                a_col[l + 1] = c_col[l]

    if lead_b:
        cells[(len(row_dims), s_col[m])] = eqs[m].B
        row_dims.append(eqs[m].B.rows)
    for offset, l in enumerate(range(m, n + 1)):
        eq = eqs[l]
        band = len(row_dims)
        row_dims.append(eq.E.rows)
        if l in a_col:
            cells[(band, a_col[l])] = eq.A
        cells[(band, s_col[l])] = -eq.E if offset % 2 else eq.E
        if l in c_col:
            cells[(band, c_col[l])] = eq.C
        if l < n or trail_d:
            band = len(row_dims)
            row_dims.append(eq.D.rows)
            cells[(band, s_col[l])] = eq.D
            if l < n:
                cells[(band, s_col[l + 1])] = eqs[l + 1].B
    return block_matrix(cells, row_dims, col_dims)


def coefficient_band_ac(
    eqs: Sequence[SingleEquation], m: int, n: int, *, lead_a: bool, trail_c: bool
) -> QMatrix:
    """The A/C staircase without E: row bands p_m..p_n."""
    col_dims: list[int] = []
    cells: dict[tuple[int, int], QMatrix] = {}
    a_col: dict[int, int] = {}
    if lead_a:
        a_col[m] = 0
        col_dims.append(eqs[m].A.cols)
    for offset, l in enumerate(range(m, n + 1)):
        if l in a_col:
            cells[(offset, a_col[l])] = eqs[l].A
        if l < n or trail_c:
            cells[(offset, len(col_dims))] = eqs[l].C
            if l < n:
                a_col[l + 1] = len(col_dims)
            col_dims.append(eqs[l].C.cols)
    return block_matrix(cells, [eqs[l].E.rows for l in range(m, n + 1)], col_dims)


def coefficient_band_bd(
    eqs: Sequence[SingleEquation], m: int, n: int, *, lead_b: bool, trail_d: bool
) -> QMatrix:
    """The B/D staircase without E: column bands s_m..s_n."""
    row_dims: list[int] = []
    cells: dict[tuple[int, int], QMatrix] = {}
    if lead_b:
        cells[(0, 0)] = eqs[m].B
        row_dims.append(eqs[m].B.rows)
    for offset, l in enumerate(range(m, n + 1)):
        if l < n or trail_d:
            band = len(row_dims)
            row_dims.append(eqs[l].D.rows)
            cells[(band, offset)] = eqs[l].D
            if l < n:
                cells[(band, offset + 1)] = eqs[l + 1].B
    return block_matrix(cells, row_dims, [eqs[l].E.cols for l in range(m, n + 1)])


def build_condition(system: ChainSystem, condition: ConditionId) -> tuple[QMatrix, list[QMatrix]]:
    """Left matrix and the right-hand matrices whose ranks are summed."""
    m, n = condition.window
    if n > system.k:
        raise DimError(f"{condition.label()} refers past equation {system.k}")
    try:
        lead_a, lead_b, trail_c, trail_d = STAIRCASE_SHAPES[condition.kind]
    except KeyError:
        raise ValueError(f"{condition.kind.value} is not a chain condition") from None
    eqs = system.equations
    lhs = staircase(
        eqs, m - 1, n - 1, lead_a=lead_a, lead_b=lead_b, trail_c=trail_c, trail_d=trail_d
    )
    rhs = [
        coefficient_band_ac(eqs, m - 1, n - 1, lead_a=lead_a, trail_c=trail_c),
        coefficient_band_bd(eqs, m - 1, n - 1, lead_b=lead_b, trail_d=trail_d),
    ]
    # the band owning the leading block comes first, as in r(B) + r(C) for bc
    if lead_b:
        rhs.reverse()
    return lhs, [part for part in rhs if not part.is_empty]


def evaluate_conditions(
    ids: Sequence[ConditionId], evaluate: Callable[[ConditionId], ConditionEntry]
) -> list[ConditionEntry]:
    """Evaluate every condition, on a thread pool when ``check_workers`` > 1; order is kept."""
    workers = get_settings().check_workers
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(evaluate, ids))
    return [evaluate(cid) for cid in ids]


def check_chain(system: ChainSystem, policy: RankPolicy | None = None) -> SolvabilityReport:
    policy = _resolve(policy)
    validate(system)

    def evaluate(cid: ConditionId) -> ConditionEntry:
        lhs, rhs = build_condition(system, cid)
        return rank_entry(cid, lhs, rhs, policy)

    entries = evaluate_conditions(condition_ids(system.k), evaluate)
    overall = all(entry.holds for entry in entries)
    logger.debug(
        "chain k=%d: %d/%d conditions hold", system.k, sum(e.holds for e in entries), len(entries)
    )
    return SolvabilityReport(rel_tol=policy.rel_tol, entries=entries, overall=overall)


# -- reduction --------------------------------------------------------------


@dataclass(frozen=True)
class ReductionStep:
    """Coupling of equations j and j+1 (0-based j)."""

    P: QMatrix
    Q: QMatrix
    R_P: QMatrix
    L_Q: QMatrix
    F: QMatrix
    X1_next: QMatrix  # X_{j+1} from equation j
    X2_next: QMatrix  # X_{j+1} from equation j+1


@dataclass(frozen=True)
class FactResiduals:
    index: int
    particular_solutions: float
    range_inclusion: float
    projector_rank_gap: int
    pinv_absorption: float

    def worst(self) -> float:
        return max(self.particular_solutions, self.range_inclusion, self.pinv_absorption)


@dataclass(frozen=True)
class ReductionContext:
    contexts: tuple[SingleContext, ...]
    steps: tuple[ReductionStep, ...]

    def fact_residuals(self, policy: RankPolicy | None = None) -> list[FactResiduals]:
        """Numerical residuals of the four identities the reduction relies on, per coupling."""
        policy = _resolve(policy)
        facts = []
        for j, step in enumerate(self.steps):
            ctx, nxt = self.contexts[j], self.contexts[j + 1]
            particular = max(
                ctx.eq.residual(ctx.first_unknown(), step.X1_next),
                nxt.eq.residual(step.X2_next, nxt.second_unknown()),
            )
            A, S = nxt.eq.A, nxt.S
            inclusion = (A @ nxt.A_pinv @ S - S).frobenius_norm() / (1.0 + S.frobenius_norm())
            gap = rank(vstack([ctx.R_N, ctx.R_D]), policy) - rank(ctx.R_N, policy)
            target = nxt.R_N @ nxt.eq.D
            absorbed = target @ nxt.B_pinv @ nxt.eq.B
            absorption = (absorbed - target).frobenius_norm() / (1.0 + target.frobenius_norm())
            facts.append(FactResiduals(j + 1, particular, inclusion, gap, absorption))
        return facts


def reduce(
    system: ChainSystem, policy: RankPolicy | None = None
) -> tuple[ChainSystem, ReductionContext]:
    """Chain with k-1 equations in the free parameters Y_1..Y_k; consistent iff ``system`` is."""
    policy = _resolve(policy)
    validate(system)
    if system.k < 2:
        raise DimError("reduction needs at least two equations")
    for index, eq in enumerate(system.equations, start=1):
        failing = [entry for entry in check_single_rank(eq, policy, index) if not entry.holds]
        if failing:
            raise PerEquationInconsistent(index, failing[0].condition)

    contexts = tuple(SingleContext.build(eq, policy) for eq in system.equations)
    steps = []
    hatted = []
    for j in range(system.k - 1):
        ctx, nxt = contexts[j], contexts[j + 1]
        X1_next = ctx.second_unknown()
        X2_next = nxt.first_unknown()
        scale = X1_next.frobenius_norm() + X2_next.frobenius_norm()
        F = drop_roundoff(X2_next - X1_next, [scale], policy)
        P = hstack([drop_roundoff(ctx.L_M @ ctx.L_S, [ctx.L_M, ctx.L_S], policy), -nxt.L_A])
        Q = vstack([ctx.R_D, -nxt.R_B])
        R_P, L_Q = proj_R(P, policy), proj_L(Q, policy)
        steps.append(ReductionStep(P, Q, R_P, L_Q, F, X1_next, X2_next))

        A_hat = drop_roundoff(R_P @ ctx.L_M, [R_P, ctx.L_M], policy)
        B_hat = drop_roundoff(ctx.R_N @ L_Q, [ctx.R_N, L_Q], policy)
        C_hat = drop_roundoff(R_P @ nxt.A_pinv @ nxt.S, [R_P, nxt.A_pinv, nxt.S], policy)
        D_hat = drop_roundoff(
            nxt.R_N @ nxt.eq.D @ nxt.B_pinv @ L_Q, [nxt.R_N, nxt.eq.D, nxt.B_pinv, L_Q], policy
        )
        E_hat = drop_roundoff(R_P @ F @ L_Q, [R_P, scale, L_Q], policy)
        hatted.append(SingleEquation(A_hat, B_hat, C_hat, D_hat, E_hat))

    context = ReductionContext(contexts, tuple(steps))
    if logger.isEnabledFor(logging.DEBUG):
        for facts in context.fact_residuals(policy):
            logger.debug(
                "coupling %d: facts %.2e %.2e gap=%d %.2e",
                facts.index,
                facts.particular_solutions,
                facts.range_inclusion,
                facts.projector_rank_gap,
                facts.pinv_absorption,
            )
    return ChainSystem(tuple(hatted)), context


# -- constructive solver ------------------------------------------------------


def _free(rng: np.random.Generator | None, rows: int, cols: int) -> QMatrix:
    return QMatrix.random(rng, rows, cols) if rng is not None else QMatrix.zeros(rows, cols)


def _solve_level(
    system: ChainSystem, policy: RankPolicy, rng: np.random.Generator | None, level: int
) -> list[QMatrix]:
    logger.debug("solving level %d with k=%d", level, system.k)
    if system.k == 1:
        eq = system.equations[0]
        failing = [entry for entry in check_single_rank(eq, policy) if not entry.holds]
        if failing:
            condition = failing[0].condition
            raise Inconsistent(
                f"inconsistent at recursion level {level}: {condition.label()} fails",
                condition=condition,
                level=level,
            )
        params = SingleParams.random(eq, rng) if rng is not None else None
        return list(SingleContext.build(eq, policy).solution(params))

    try:
        hatted, context = reduce(system, policy)
    except PerEquationInconsistent as exc:
        raise Inconsistent(
            f"inconsistent at recursion level {level}: equation {exc.index} has no solution",
            condition=exc.condition,
            level=level,
        ) from exc

    Y = _solve_level(hatted, policy, rng, level + 1)
    contexts = context.contexts
    k = system.k

    first_free = contexts[0].eq.x1_shape
    last_free = contexts[-1].eq.x2_shape
    Z1 = {0: _free(rng, *first_free)}
    Z2 = {0: _free(rng, *first_free)}
    Z3 = {k - 1: _free(rng, *last_free)}
    Z4 = {k - 1: _free(rng, *last_free)}
    for j, step in enumerate(context.steps):
        ctx, nxt = contexts[j], contexts[j + 1]
        G = (
            step.F
            - ctx.L_M @ Y[j] @ ctx.R_N
            - nxt.A_pinv @ nxt.S @ Y[j + 1] @ nxt.R_N @ nxt.eq.D @ nxt.B_pinv
        )
        try:
            U, V = solve_two_block(step.P, step.Q, G, policy)
        except Inconsistent as exc:
            raise Inconsistent(
                f"coupling {j + 1} at recursion level {level} has no solution",
                level=level,
                residual=exc.residual,
            ) from exc
        t, u = ctx.eq.x2_shape
        Z3[j], Z1[j + 1] = U[:t, :], U[t:, :]
        Z4[j], Z2[j + 1] = V[:, :u], V[:, u:]

    X = [contexts[0].first_unknown(Y[0], Z1[0], Z2[0])]
    X.extend(contexts[i].second_unknown(Y[i], Z3[i], Z4[i]) for i in range(k))
    return X


def solve_chain(
    system: ChainSystem,
    policy: RankPolicy | None = None,
    seed: int | None = None,
    residual_tol: float | None = None,
) -> ChainSolution:
    """One solution of the chain; ``seed`` samples the free parameters, ``None`` zeroes them."""
    policy = _resolve(policy)
    validate(system)
    tol = residual_tol if residual_tol is not None else get_settings().residual_tol
    rng = np.random.default_rng(seed) if seed is not None else None
    X = _solve_level(system, policy, rng, level=0)
    residuals = system.residuals(X)
    max_residual = max(residuals)
    if max_residual > tol:
        raise Inconsistent(
            f"constructed solution misses by {max_residual:.3e} (tolerance {tol:.1e})",
            level=0,
            residual=max_residual,
        )
    logger.debug("chain k=%d solved, max residual %.3e", system.k, max_residual)
    return ChainSolution(tuple(X), tuple(residuals), max_residual, seed)


def one_sided_chain(
    A: Sequence[QMatrix], D: Sequence[QMatrix], E: Sequence[QMatrix]
) -> ChainSystem:
    """``A_i X_i + X_{i+1} D_i = E_i`` as a chain with identity B_i and C_i."""
    if not len(A) == len(D) == len(E):
        raise DimError(f"one-sided chain lists have lengths {len(A)}, {len(D)}, {len(E)}")
    equations = []
    for index, (A_i, D_i, E_i) in enumerate(zip(A, D, E, strict=True), start=1):
        p, s = E_i.shape
        if A_i.rows != p:
            raise DimError(f"equation {index}: A rows {A_i.rows} != E rows {p}")
        if D_i.cols != s:
            raise DimError(f"equation {index}: D cols {D_i.cols} != E cols {s}")
        equations.append(SingleEquation(A_i, QMatrix.identity(s), QMatrix.identity(p), D_i, E_i))
    system = ChainSystem(tuple(equations))
    validate(system)
    return system


# -- generation -------------------------------------------------------------


@dataclass(frozen=True)
class GeneratedChain:
    system: ChainSystem
    X: tuple[QMatrix, ...]
    perturbed: int | None = None


def _draw_dim(rng: np.random.Generator, dims: DimsSpec) -> int:
    if isinstance(dims, int):
        return dims
    low, high = dims
    return int(rng.integers(low, high + 1))


def random_low_rank(rng: np.random.Generator, rows: int, cols: int) -> QMatrix:
    """Random product of rank strictly below ``min(rows, cols)`` (zero when that is 0 or 1)."""
    cap = min(rows, cols)
    inner = int(rng.integers(0, cap)) if cap > 0 else 0
    return QMatrix.random(rng, rows, inner) @ QMatrix.random(rng, inner, cols)


def random_coefficient(
    rng: np.random.Generator, rows: int, cols: int, style: GenerateStyle
) -> QMatrix:
    if style == "mixed":
        style = ("generic", "rank_deficient", "zero_blocks")[int(rng.choice(3, p=[0.5, 0.3, 0.2]))]
        if style == "zero_blocks":
            return QMatrix.zeros(rows, cols)
    if style == "rank_deficient":
        return random_low_rank(rng, rows, cols)
    if style == "zero_blocks" and rng.random() < 0.3:
        return QMatrix.zeros(rows, cols)
    return QMatrix.random(rng, rows, cols)


def generate_instance(
    dims: DimsSpec,
    k: int,
    seed: int,
    mode: GenerateMode = "consistent",
    style: GenerateStyle = "generic",
) -> GeneratedChain:
    """Forward construction from random unknowns; deterministic per argument tuple."""
    if k < 1:
        raise DimError(f"k must be positive, got {k}")
    rng = np.random.default_rng(seed)
    # unknown X_i is q_i x r_i; equation i has p_i x s_i right-hand side
    unknown = [(_draw_dim(rng, dims), _draw_dim(rng, dims)) for _ in range(k + 1)]
    outer = [(_draw_dim(rng, dims), _draw_dim(rng, dims)) for _ in range(k)]
    X = tuple(QMatrix.random(rng, q, r) for q, r in unknown)
    equations = []
    for i, (p, s) in enumerate(outer):
        (q, r), (t, u) = unknown[i], unknown[i + 1]
        A = random_coefficient(rng, p, q, style)
        B = random_coefficient(rng, r, s, style)
        C = random_coefficient(rng, p, t, style)
        D = random_coefficient(rng, u, s, style)
        equations.append(SingleEquation(A, B, C, D, A @ X[i] @ B + C @ X[i + 1] @ D))
    perturbed = None
    if mode == "perturbed":
        perturbed = int(rng.integers(k))
        eq = equations[perturbed]
        noise = QMatrix.random(rng, *eq.E.shape)
        equations[perturbed] = SingleEquation(eq.A, eq.B, eq.C, eq.D, eq.E + noise)
    elif mode != "consistent":
        raise ValueError(f"unknown generation mode {mode!r}")
    return GeneratedChain(ChainSystem(tuple(equations)), X, perturbed)


def generate(
    dims: DimsSpec,
    k: int,
    seed: int,
    mode: GenerateMode = "consistent",
    style: GenerateStyle = "generic",
) -> ChainSystem:
    return generate_instance(dims, k, seed, mode, style).system


def _resolve(policy: RankPolicy | None) -> RankPolicy:
    return policy if policy is not None else RankPolicy.from_settings()
