"""Tests for the interior-point LMI solver and the real-symmetric embedding."""

import numpy as np
import numpy.testing as npt
import pytest

from regret_ls.sdp import (
    LmiBlock,
    LmiSystem,
    SolveStatus,
    SolverOptions,
    embed_hermitian,
    solve,
)


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


def max_eigenvalue_problem(a):
    """minimize gamma subject to gamma I - A >= 0; optimum is lambda_max(A)."""
    d = a.shape[0]
    return LmiSystem(
        num_vars=1,
        objective=np.array([1.0]),
        blocks=(LmiBlock(f0=-a, coeffs=(np.eye(d, dtype=np.complex128),)),),
    )


class TestEmbedHermitian:
    def test_real_scalar(self):
        npt.assert_allclose(embed_hermitian(np.array([[1.0]])), np.eye(2))

    def test_pauli_matrix_eigenvalues_double(self):
        f = np.array([[0.0, -1.0j], [1.0j, 0.0]])
        e = embed_hermitian(f)
        npt.assert_allclose(e, e.T)
        npt.assert_allclose(np.linalg.eigvalsh(e), [-1.0, -1.0, 1.0, 1.0], atol=1e-14)

    def test_spectrum_doubles_for_random_hermitian(self):
        rng = np.random.default_rng(0)
        f = random_hermitian(rng, 4)
        lam = np.linalg.eigvalsh(f)
        lam2 = np.linalg.eigvalsh(embed_hermitian(f))
        npt.assert_allclose(lam2, np.sort(np.repeat(lam, 2)), atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            embed_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            embed_hermitian(np.zeros((2, 3)))


class TestLmiSystemValidation:
    def test_counts_must_match(self):
        eye = np.eye(2, dtype=np.complex128)
        with pytest.raises(ValueError):
            LmiSystem(num_vars=2, objective=np.ones(1), blocks=(LmiBlock(eye, (eye, eye)),))
        with pytest.raises(ValueError):
            LmiSystem(num_vars=2, objective=np.ones(2), blocks=(LmiBlock(eye, (eye,)),))
        with pytest.raises(ValueError):
            LmiSystem(num_vars=1, objective=np.ones(1), blocks=())

    def test_rejects_non_hermitian_block(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
        with pytest.raises(ValueError):
            LmiSystem(num_vars=1, objective=np.ones(1), blocks=(LmiBlock(bad, (np.eye(2),)),))

    def test_evaluate_and_min_eigenvalues(self):
        rng = np.random.default_rng(1)
        f0 = random_hermitian(rng, 3)
        f1 = random_hermitian(rng, 3)
        sys_ = LmiSystem(num_vars=1, objective=np.ones(1), blocks=(LmiBlock(f0, (f1,)),))
        z = np.array([0.7])
        npt.assert_allclose(sys_.evaluate_block(0, z), f0 + 0.7 * f1, atol=1e-14)
        lam = sys_.min_eigenvalues(z)
        npt.assert_allclose(lam[0], np.linalg.eigvalsh(f0 + 0.7 * f1)[0], atol=1e-12)

    def test_json_roundtrip(self):
        rng = np.random.default_rng(2)
        sys_ = max_eigenvalue_problem(random_hermitian(rng, 3))
        back = LmiSystem.from_json(sys_.to_json())
        assert back.num_vars == sys_.num_vars
        npt.assert_allclose(back.objective, sys_.objective)
        npt.assert_allclose(back.blocks[0].f0, sys_.blocks[0].f0)
        npt.assert_allclose(back.blocks[0].coeffs[0], sys_.blocks[0].coeffs[0])


class TestSolveEigenvalueProblems:
    def test_recovers_max_eigenvalue(self):
        rng = np.random.default_rng(3)
        for d in (2, 3, 5):
            a = random_hermitian(rng, d)
            sol = solve(max_eigenvalue_problem(a))
            assert sol.status is SolveStatus.OPTIMAL
            npt.assert_allclose(sol.objective_value, np.linalg.eigvalsh(a)[-1], atol=1e-6)
            assert sol.duality_gap < 1e-7

    def test_two_blocks_take_the_larger_eigenvalue(self):
        rng = np.random.default_rng(4)
        a = random_hermitian(rng, 3)
        b = random_hermitian(rng, 4)
        eye = lambda d: np.eye(d, dtype=np.complex128)
        sys_ = LmiSystem(
            num_vars=1,
            objective=np.array([1.0]),
            blocks=(LmiBlock(-a, (eye(3),)), LmiBlock(-b, (eye(4),))),
        )
        sol = solve(sys_)
        oracle = max(np.linalg.eigvalsh(a)[-1], np.linalg.eigvalsh(b)[-1])
        assert sol.status is SolveStatus.OPTIMAL
        npt.assert_allclose(sol.objective_value, oracle, atol=1e-6)

    def test_certificate_is_feasible(self):
        rng = np.random.default_rng(5)
        sys_ = max_eigenvalue_problem(random_hermitian(rng, 4))
        sol = solve(sys_)
        assert min(sys_.min_eigenvalues(sol.z_star)) > -1e-8

    def test_initial_point_and_tau_echo(self):
        rng = np.random.default_rng(6)
        a = random_hermitian(rng, 3)
        base = max_eigenvalue_problem(a)
        warm = LmiSystem(
            num_vars=1,
            objective=base.objective,
            blocks=base.blocks,
            initial_point=np.array([np.linalg.eigvalsh(a)[-1] + 1.0]),
            tau_indices=(0,),
        )
        sol = solve(warm)
        assert sol.status is SolveStatus.OPTIMAL
        npt.assert_allclose(sol.tau, [sol.z_star[0]])
        with pytest.raises(ValueError):
            solve(
                LmiSystem(
                    num_vars=1,
                    objective=base.objective,
                    blocks=base.blocks,
                    initial_point=np.zeros(2),
                )
            )


class TestSolveBehavior:
    def test_merit_is_monotone(self):
        rng = np.random.default_rng(7)
        sol = solve(max_eigenvalue_problem(random_hermitian(rng, 5)))
        h = np.array(sol.merit_history)
        assert np.all(np.diff(h) < 1e-9 * np.maximum(1.0, np.abs(h[:-1])))

    def test_detects_infeasibility(self):
        # z >= 1 and z <= -1 cannot both hold
        one = np.eye(1, dtype=np.complex128)
        sys_ = LmiSystem(
            num_vars=1,
            objective=np.array([1.0]),
            blocks=(LmiBlock(-one, (one,)), LmiBlock(-one, (-one,))),
        )
        sol = solve(sys_)
        assert sol.status is SolveStatus.INFEASIBLE

    def test_iteration_cap_is_respected(self):
        rng = np.random.default_rng(8)
        sys_ = max_eigenvalue_problem(random_hermitian(rng, 4))
        sol = solve(sys_, SolverOptions(max_iterations=2))
        assert sol.status is SolveStatus.MAX_ITERATIONS
        assert sol.iterations == 2
