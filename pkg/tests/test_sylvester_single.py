import numpy as np
import pytest

from qsylv.core.errors import DimError, Inconsistent
from qsylv.models.schemas import ConditionKind
from qsylv.services.chain_solver import ChainSystem, generate_instance
from qsylv.services.oracle_testkit import oracle_consistent
from qsylv.services.quat_core import QMatrix
from qsylv.services.sylvester_single import (
    SingleContext,
    SingleEquation,
    SingleParams,
    check_single_projector,
    check_single_rank,
    solve_one_sided,
    solve_single,
    solve_two_block,
)


def identity_equation(rng, n=3) -> SingleEquation:
    I = QMatrix.identity(n)
    return SingleEquation(I, I, QMatrix.zeros(n, n), QMatrix.zeros(n, n), QMatrix.random(rng, n, n))


def zero_equation(rng) -> SingleEquation:
    Z = QMatrix.zeros(2, 2)
    return SingleEquation(Z, Z, Z, Z, QMatrix.random(rng, 2, 2))


def forward_equation(rng, p=3, q=2, r=2, s=3, t=2, u=2) -> SingleEquation:
    A, B = QMatrix.random(rng, p, q), QMatrix.random(rng, r, s)
    C, D = QMatrix.random(rng, p, t), QMatrix.random(rng, u, s)
    X1, X2 = QMatrix.random(rng, q, r), QMatrix.random(rng, t, u)
    return SingleEquation(A, B, C, D, A @ X1 @ B + C @ X2 @ D)


def test_validate_names_the_constraint(rng):
    """Test that a shape violation names both sides."""
    eq = SingleEquation(
        QMatrix.zeros(3, 2), QMatrix.zeros(2, 2), QMatrix.zeros(2, 2), QMatrix.zeros(2, 2), QMatrix.zeros(2, 2)
    )
    with pytest.raises(DimError, match="A rows 3 != E rows 2"):
        eq.validate()


def test_projector_check_identity_coefficients(rng, policy):
    """Test that A = B = I, C = D = 0 is consistent for every E."""
    result = check_single_projector(identity_equation(rng), policy)

    assert result.holds
    assert all(value == 0.0 for value in result.residuals.values())


def test_projector_check_zero_coefficients(rng, policy):
    """Test that zero coefficients with E != 0 are inconsistent."""
    result = check_single_projector(zero_equation(rng), policy)

    assert not result.holds
    assert result.residuals["R_M R_A E"] > 0.0


def test_projector_check_forward_construction(rng, policy):
    assert check_single_projector(forward_equation(rng), policy).holds


def test_rank_check_identity_coefficients(rng, policy):
    """Test that all four equalities hold for A = B = I, C = D = 0."""
    entries = check_single_rank(identity_equation(rng), policy)

    assert [entry.kind for entry in entries] == [
        ConditionKind.ROW,
        ConditionKind.COL,
        ConditionKind.AD,
        ConditionKind.BC,
    ]
    assert all(entry.holds for entry in entries)


def test_rank_check_zero_coefficients(rng, policy):
    """Test that the row equality fails for zero coefficients with E != 0."""
    row = check_single_rank(zero_equation(rng), policy)[0]

    assert row.kind is ConditionKind.ROW
    assert row.lhs_rank > 0
    assert row.rhs_rank == 0
    assert not row.holds


@pytest.mark.slow
def test_three_criteria_agree():
    """Test projector, rank and oracle verdicts on 200 random equations; solve the consistent ones."""
    consistent_count = 0
    for seed in range(200):
        mode = "consistent" if seed % 2 else "perturbed"
        instance = generate_instance((1, 4), 1, seed, mode, "mixed")
        eq = instance.system.equations[0]

        by_projector = check_single_projector(eq).holds
        by_rank = all(entry.holds for entry in check_single_rank(eq))
        by_oracle = oracle_consistent(ChainSystem((eq,)))

        assert by_projector == by_rank == by_oracle, seed
        if by_rank:
            consistent_count += 1
            rng = np.random.default_rng(seed)
            for _ in range(5):
                X1, X2 = solve_single(eq, SingleParams.random(eq, rng))
                assert eq.residual(X1, X2) <= 1e-8
    assert consistent_count >= 100


def test_identity_coefficients_solution(policy):
    """Test that A = B = C = D = I gives X1 = E and X2 = 0."""
    I = QMatrix.identity(3)
    E = QMatrix.random(np.random.default_rng(5), 3, 3)

    X1, X2 = solve_single(SingleEquation(I, I, I, I, E), policy=policy)

    assert X1.allclose(E, atol=1e-12)
    assert X2.allclose(QMatrix.zeros(3, 3), atol=1e-12)


def test_zero_width_second_term(rng, policy):
    """Test A X1 B = E when C and D have zero width."""
    I = QMatrix.identity(2)
    E = QMatrix.random(rng, 2, 2)

    X1, X2 = solve_single(SingleEquation(I, I, QMatrix.zeros(2, 0), QMatrix.zeros(0, 2), E), policy=policy)

    assert X1.allclose(E, atol=1e-12)
    assert X2.shape == (0, 0)


def test_random_parameters_give_distinct_solutions(rng, policy):
    """Test that two parameter draws give two solutions of a rank-deficient equation."""
    eq = forward_equation(rng, p=2, q=3, r=3, s=2, t=3, u=3)

    first = solve_single(eq, SingleParams.random(eq, rng), policy)
    second = solve_single(eq, SingleParams.random(eq, rng), policy)

    assert eq.residual(*first) <= 1e-8
    assert eq.residual(*second) <= 1e-8
    assert not first[0].allclose(second[0], atol=1e-6)


def test_general_solution_formulas_match(rng, policy):
    """Test that solution() combines the two unknown formulas."""
    eq = forward_equation(rng)
    ctx = SingleContext.build(eq, policy)
    params = SingleParams.random(eq, rng)

    X1, X2 = ctx.solution(params)

    assert X1.allclose(ctx.first_unknown(params.Y1, params.Y2, params.Y3), atol=0.0)
    assert X2.allclose(ctx.second_unknown(params.Y1, params.Y4, params.Y5), atol=0.0)
    assert (eq.A @ ctx.A_pinv @ ctx.S - ctx.S).frobenius_norm() <= 1e-10 * (1 + ctx.S.frobenius_norm())


def test_solve_single_reports_failing_condition(rng, policy):
    with pytest.raises(Inconsistent) as exc_info:
        solve_single(zero_equation(rng), policy=policy)

    assert exc_info.value.condition.kind is ConditionKind.ROW


def test_two_block_identity(rng, policy):
    """Test P = I gives U = G, V = 0."""
    G = QMatrix.random(rng, 3, 2)

    U, V = solve_two_block(QMatrix.identity(3), QMatrix.random(rng, 4, 2), G, policy)

    assert U.allclose(G, atol=1e-12)
    assert V.frobenius_norm() == 0.0


def test_two_block_zero_left(rng, policy):
    """Test P = 0 with Q invertible gives V = G Q^-1."""
    G, Q = QMatrix.random(rng, 2, 3), QMatrix.random(rng, 3, 3)

    U, V = solve_two_block(QMatrix.zeros(2, 4), Q, G, policy)

    assert U.frobenius_norm() == 0.0
    assert (V @ Q).allclose(G, atol=1e-10)


def test_two_block_inconsistent(rng, policy):
    """Test P = 0, Q = 0, G != 0 is inconsistent and carries the gap."""
    G = QMatrix.random(rng, 2, 2)

    with pytest.raises(Inconsistent) as exc_info:
        solve_two_block(QMatrix.zeros(2, 2), QMatrix.zeros(2, 2), G, policy)

    assert exc_info.value.residual == pytest.approx(G.frobenius_norm())


def test_two_block_dimension_mismatch(policy):
    with pytest.raises(DimError, match="P rows 2 != G rows 3"):
        solve_two_block(QMatrix.zeros(2, 2), QMatrix.zeros(2, 2), QMatrix.zeros(3, 2), policy)


def test_one_sided_equation(rng, policy):
    """Test A X1 + X2 D = E on a forward-constructed instance."""
    A, D = QMatrix.random(rng, 3, 1), QMatrix.random(rng, 1, 2)
    E = A @ QMatrix.random(rng, 1, 2) + QMatrix.random(rng, 3, 1) @ D

    X1, X2 = solve_one_sided(A, D, E, policy)

    assert (A @ X1 + X2 @ D).allclose(E, atol=1e-10)
