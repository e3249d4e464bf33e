import numpy as np
import pytest

from qsylv.core.errors import DimError, Inconsistent, NotEtaHermitianRHS
from qsylv.models.schemas import ConditionKind
from qsylv.services.chain_solver import check_chain
from qsylv.services.eta_hermitian import (
    EtaChainSystem,
    EtaEquation,
    as_chain,
    check_eta,
    eta_condition_ids,
    eta_hermitian_residual,
    generate_eta,
    generate_eta_instance,
    random_eta_hermitian,
    solve_eta,
    symmetrize,
)
from qsylv.services.oracle_testkit import oracle_consistent
from qsylv.services.quat_core import EtaUnit, QMatrix, Quaternion


def single(eta: EtaUnit, A: QMatrix, C: QMatrix, E: QMatrix) -> EtaChainSystem:
    return EtaChainSystem(eta, (EtaEquation(A, C, E),))


def test_as_chain_sets_eta_conjugates(rng):
    """Test B_i = A_i^{eta*} and D_i = C_i^{eta*}."""
    system = generate_eta(2, 2, seed=3, eta=EtaUnit.J)

    chain = as_chain(system)

    for eta_eq, eq in zip(system.equations, chain.equations, strict=True):
        assert np.array_equal(eq.B.data, eta_eq.A.eta_conj_transpose(EtaUnit.J).data)
        assert np.array_equal(eq.D.data, eta_eq.C.eta_conj_transpose(EtaUnit.J).data)
        assert eq.E is eta_eq.E


def test_non_hermitian_rhs_is_rejected():
    """Test that E = [[i]] is not i-Hermitian."""
    i = QMatrix.from_quaternions([[Quaternion(x=1)]])
    system = single(EtaUnit.I, QMatrix.identity(1), QMatrix.zeros(1, 1), i)

    with pytest.raises(NotEtaHermitianRHS) as exc_info:
        as_chain(system)

    assert exc_info.value.index == 1
    assert exc_info.value.residual == pytest.approx(2.0)


def test_rectangular_rhs_is_rejected(rng):
    system = single(EtaUnit.K, QMatrix.random(rng, 2, 2), QMatrix.random(rng, 2, 2), QMatrix.zeros(2, 3))

    with pytest.raises(DimError, match="expected square"):
        as_chain(system)


def test_hermitian_residual_of_non_square_is_infinite():
    assert eta_hermitian_residual(QMatrix.zeros(2, 3), EtaUnit.I) == float("inf")


@pytest.mark.parametrize("eta", list(EtaUnit))
def test_symmetrize_is_eta_hermitian(rng, eta):
    Y = symmetrize(QMatrix.random(rng, 3, 3), eta)

    assert eta_hermitian_residual(Y, eta) <= 1e-15


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_eta_condition_count(k):
    """Test k(k+1) conditions: two per equation, two per pair."""
    assert len(eta_condition_ids(k)) == k * (k + 1)


def test_check_eta_single_equation(policy):
    """Test that the single-equation certificate has two entries, both holding."""
    system = generate_eta(2, 1, seed=5, eta=EtaUnit.I)

    report = check_eta(system, policy)

    assert [entry.kind for entry in report.entries] == [ConditionKind.ETA_ROW, ConditionKind.ETA_AD]
    assert report.overall


def test_check_eta_two_equations(policy):
    report = check_eta(generate_eta((1, 3), 2, seed=6, eta=EtaUnit.K), policy)

    assert len(report.entries) == 6
    assert report.overall


def test_identity_coefficient_solution(rng, policy):
    """Test A = I, C = 0: X_1 = E_1 and the solution is eta-Hermitian."""
    E = random_eta_hermitian(rng, 2, EtaUnit.J)
    system = single(EtaUnit.J, QMatrix.identity(2), QMatrix.zeros(2, 2), E)

    solution = solve_eta(system, policy)

    assert solution.X[0].allclose(E, atol=1e-10)
    assert all(eta_hermitian_residual(X, EtaUnit.J) <= 1e-10 for X in solution.X)


def test_zero_coefficients_are_inconsistent(policy):
    """Test A = C = 0 with E = I: the certificate fails and the solver raises."""
    system = single(EtaUnit.I, QMatrix.zeros(2, 2), QMatrix.zeros(2, 2), QMatrix.identity(2))

    assert not check_eta(system, policy).overall
    with pytest.raises(Inconsistent):
        solve_eta(system, policy)


def test_seeded_eta_solution(policy):
    system = generate_eta(3, 2, seed=12, eta=EtaUnit.K, style="rank_deficient")

    solution = solve_eta(system, policy, seed=4)

    assert solution.seed == 4
    assert solution.max_residual <= 1e-8
    assert all(eta_hermitian_residual(X, EtaUnit.K) <= 1e-10 for X in solution.X)


def test_generated_instance_reproduces_rhs():
    instance = generate_eta_instance((1, 3), 3, seed=2, eta=EtaUnit.I)

    assert max(instance.system.residuals(instance.X)) <= 1e-12
    assert instance.perturbed is None


def test_perturbed_rhs_stays_eta_hermitian():
    instance = generate_eta_instance(2, 2, seed=2, eta=EtaUnit.J, mode="perturbed")

    assert instance.perturbed in (0, 1)
    as_chain(instance.system)


@pytest.mark.slow
@pytest.mark.parametrize("eta", list(EtaUnit))
@pytest.mark.parametrize("k", [1, 2, 3])
def test_forward_constructions_solve(k, eta, policy):
    """Test 20 forward constructions per (k, eta): certificate holds, solution eta-Hermitian."""
    for seed in range(20):
        system = generate_eta((1, 3), k, seed=100 * k + seed, eta=eta)

        report = check_eta(system, policy)
        solution = solve_eta(system, policy)

        assert report.overall, seed
        assert solution.max_residual <= 1e-8
        assert all(eta_hermitian_residual(X, eta) <= 1e-10 for X in solution.X)


@pytest.mark.slow
def test_eta_certificate_agrees_with_chain_and_oracle(policy):
    """Test 100 mixed instances: eta certificate, chain certificate and oracle agree."""
    etas = list(EtaUnit)
    for seed in range(100):
        k = 1 + seed % 3
        mode = "perturbed" if seed % 2 else "consistent"
        system = generate_eta((1, 3), k, seed, etas[seed % 3], mode, "mixed")
        chain = as_chain(system)

        verdict = check_eta(system, policy).overall

        assert verdict == check_chain(chain, policy).overall, seed
        assert verdict == oracle_consistent(chain), seed
