import numpy as np
import pytest

from qsylv.core.config import get_settings
from qsylv.core.errors import SizeCapExceeded
from qsylv.services.chain_solver import ChainSystem, generate, generate_instance, solve_chain
from qsylv.services.oracle_testkit import (
    apply_residual,
    least_squares_residual,
    linearize,
    oracle_consistent,
    oracle_verdict,
    vectorize,
)
from qsylv.services.quat_core import QMatrix, Quaternion
from qsylv.services.sylvester_single import SingleEquation


def scalar_system(A: QMatrix, B: QMatrix, E: QMatrix | None = None) -> ChainSystem:
    """``A X B = E`` for 1x1 X with an absent second term."""
    E = E if E is not None else QMatrix.zeros(1, 1)
    return ChainSystem((SingleEquation(A, B, QMatrix.zeros(1, 0), QMatrix.zeros(0, 1), E),))


def test_identity_linearization():
    """Test that A = B = I with p x 0 and 0 x s second terms gives M = I_4."""
    one = QMatrix.identity(1)

    linearization = linearize(scalar_system(one, one))

    assert linearization.unknowns == 4
    assert linearization.equations == 4
    assert np.array_equal(linearization.M, np.eye(4))


def test_left_multiplication_by_i():
    """Test that A = [[i]] maps (w, x, y, z) to (-x, w, -z, y)."""
    i = QMatrix.from_quaternions([[Quaternion(x=1)]])

    M = linearize(scalar_system(i, QMatrix.identity(1))).M

    assert np.array_equal(M @ np.array([1.0, 2.0, 3.0, 4.0]), np.array([-2.0, 1.0, -4.0, 3.0]))


def test_right_multiplication_by_i():
    """Test that B = [[i]] maps (w, x, y, z) to (-x, w, z, -y)."""
    i = QMatrix.from_quaternions([[Quaternion(x=1)]])

    M = linearize(scalar_system(QMatrix.identity(1), i)).M

    assert np.array_equal(M @ np.array([1.0, 2.0, 3.0, 4.0]), np.array([-2.0, 1.0, 4.0, -3.0]))


def test_linearization_applies_the_chain():
    """Test M vec(X) against the chain applied to random unknowns."""
    instance = generate_instance((1, 3), 3, seed=9, style="mixed")
    system = instance.system

    linearization = linearize(system)
    applied = [eq.apply(instance.X[i], instance.X[i + 1]) for i, eq in enumerate(system.equations)]

    assert linearization.unknowns == vectorize(instance.X).size
    assert np.allclose(linearization.M @ vectorize(instance.X), vectorize(applied), atol=1e-12)
    assert apply_residual(linearization, instance.X) <= 1e-10


def test_consistent_and_inconsistent_examples():
    """Test zero coefficients with E = 0 and E != 0."""
    zero = QMatrix.zeros(1, 1)
    nonzero = QMatrix.from_real([[1.0]])

    assert oracle_consistent(scalar_system(zero, zero))
    verdict = oracle_verdict(scalar_system(zero, zero, nonzero))
    assert not verdict.consistent
    assert verdict.residual == pytest.approx(1.0)


def test_forward_constructions_are_consistent():
    for seed in range(10):
        assert oracle_consistent(generate((1, 3), 2, seed=seed, style="mixed")), seed


def test_size_cap():
    """Test that a chain over the cap is refused before any work."""
    system = generate(4, 2, seed=0)

    with pytest.raises(SizeCapExceeded) as exc_info:
        linearize(system, cap=100)

    assert exc_info.value.unknowns == 3 * 4 * 16
    assert exc_info.value.cap == 100


def test_size_cap_from_settings(monkeypatch):
    monkeypatch.setenv("QSYLV_ORACLE_SIZE_CAP", "10")
    get_settings.cache_clear()

    with pytest.raises(SizeCapExceeded):
        oracle_consistent(generate(2, 1, seed=0))


def test_least_squares_without_unknowns():
    """Test that zero-size unknowns leave the whole right side as residual."""
    E = QMatrix.from_real([[3.0, 4.0]])
    system = ChainSystem(
        (SingleEquation(QMatrix.zeros(1, 0), QMatrix.zeros(0, 2), QMatrix.zeros(1, 0), QMatrix.zeros(0, 2), E),)
    )

    assert least_squares_residual(linearize(system)) == pytest.approx(5.0)


def test_solver_solutions_satisfy_the_linearization(policy):
    """Test that solve_chain output zeroes the linearized residual."""
    system = generate((1, 3), 3, seed=14, style="rank_deficient")
    solution = solve_chain(system, policy, seed=3)

    linearization = linearize(system)

    assert apply_residual(linearization, solution.X) <= 1e-8 * (1 + np.linalg.norm(linearization.e))
