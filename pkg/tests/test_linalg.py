from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from minorbit import families as fam
from minorbit.linalg import (DEFAULT_TOL, SingularSystemError, StructureError, Tolerances, as_matrix,
                             column_norm, commutator, expm_antihermitian, hermitian_eig, is_antihermitian,
                             is_hermitian, is_unitary, operator_norm, pivot_orthogonal_diagonal,
                             structure_flag)

E12 = np.array([[0, 1], [0, 0]], dtype=complex)
E21 = E12.T.copy()


def random_antihermitian(rng, n, imaginary=False):
    if imaginary:
        S = rng.standard_normal((n, n))
        return 1j * (S + S.T) / 2
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (A - A.conj().T) / 2


small_real = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def symmetric(n):
    return arrays(float, (n, n), elements=small_real).map(lambda a: (a + a.T) / 2)


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(np.eye(5)) == 1.0

    def test_zero(self):
        assert operator_norm(np.zeros((3, 3))) == 0.0

    def test_two_by_two_imaginary(self):
        assert operator_norm(0.3j * (E12 + E21)) == pytest.approx(0.3, abs=1e-15)

    def test_general_matrix_uses_singular_values(self):
        A = np.array([[1.0, 2.0], [0.0, 1.0]])
        assert operator_norm(A) == pytest.approx(1 + np.sqrt(2), abs=1e-14)

    def test_rejects_non_square(self):
        with pytest.raises(StructureError):
            operator_norm(np.zeros((2, 3)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            as_matrix(np.array([[np.nan]]))

    @settings(max_examples=40, deadline=None)
    @given(symmetric(5))
    def test_matches_svd_for_antihermitian(self, S):
        Z = 1j * S
        assert operator_norm(Z) == pytest.approx(np.linalg.svd(Z, compute_uv=False)[0], abs=1e-12)


class TestHermitianEig:
    def test_diagonal(self):
        w, _ = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_array_equal(w, [1.0, 2.0, 3.0])

    def test_swap(self):
        w, _ = hermitian_eig((E12 + E21).real)
        np.testing.assert_allclose(w, [-1.0, 1.0], atol=1e-15)

    def test_random_reconstruction(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        H = (A + A.conj().T) / 2
        w, V = hermitian_eig(H)
        assert np.max(np.abs(V @ np.diag(w) @ V.conj().T - H)) <= 1e-12
        assert is_unitary(V, 1e-12)

    def test_antihermitian_input(self):
        w, V = hermitian_eig(1j * np.diag([2.0, -1.0]))
        np.testing.assert_allclose(w, [-1.0, 2.0])

    def test_deterministic_phases(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        H = (A + A.conj().T) / 2
        V1 = hermitian_eig(H).eigenvectors
        V2 = hermitian_eig(H.copy()).eigenvectors
        np.testing.assert_array_equal(V1, V2)

    def test_rejects_general(self):
        with pytest.raises(StructureError):
            hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestExpm:
    def test_zero_generator(self):
        np.testing.assert_allclose(expm_antihermitian(np.zeros((4, 4)), 2.7), np.eye(4), atol=1e-15)

    def test_scalar_phase(self):
        assert expm_antihermitian(np.array([[1j * np.pi]]), 1.0)[0, 0] == pytest.approx(-1.0, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(symmetric(4), st.floats(-5, 5))
    def test_group_inverse_and_unitarity(self, S, t):
        Z = 1j * S
        U = expm_antihermitian(Z, t)
        assert np.max(np.abs(U @ expm_antihermitian(Z, -t) - np.eye(4))) <= DEFAULT_TOL.alg
        assert is_unitary(U, DEFAULT_TOL.alg)

    def test_matches_scipy(self):
        from scipy.linalg import expm
        rng = np.random.default_rng(11)
        Z = random_antihermitian(rng, 6)
        np.testing.assert_allclose(expm_antihermitian(Z, 0.7), expm(0.7 * Z), atol=1e-12)


class TestCommutator:
    def test_identity_commutes(self):
        B = np.arange(9.0).reshape(3, 3)
        assert np.all(commutator(np.eye(3), B) == 0)

    def test_diagonals_commute(self):
        assert np.all(commutator(np.diag([1.0, 2.0]), np.diag([3.0, 4.0])) == 0)

    def test_two_by_two(self):
        C = commutator(1j * (E12 + E21), np.diag([1.0, 2.0]))
        np.testing.assert_allclose(C, np.array([[0, 1j], [-1j, 0]]))

    def test_dimension_mismatch(self):
        with pytest.raises(StructureError):
            commutator(np.eye(2), np.eye(3))


class TestColumnNorm:
    def test_zero_column(self):
        A = np.zeros((3, 3))
        A[0, 1] = 5
        assert column_norm(A, 0) == 0.0

    def test_identity(self):
        assert all(column_norm(np.eye(4), j) == 1.0 for j in range(4))

    def test_L_first_column(self):
        L = fam.build_L(fam.FamilyParams(gamma=0.5, N=40))
        # independent closed form of the truncated geometric sum
        closed = np.sqrt(sum(0.25**i for i in range(1, 40)))
        assert column_norm(L, 0) == pytest.approx(closed, abs=1e-15)
        assert abs(column_norm(L, 0) - np.sqrt(1 / 3)) < 1e-11

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            column_norm(np.eye(2), 2)


class TestStructure:
    def test_flags(self):
        assert structure_flag(np.diag([1.0, 2.0])) == "diagonal"
        assert structure_flag(1j * (E12 + E21)) == "anti_hermitian"
        assert structure_flag((E12 + E21).real) == "hermitian"
        assert structure_flag(np.array([[1.0, 2.0], [0.0, 1.0]])) == "general"
        rot = np.array([[np.cos(1), -np.sin(1)], [np.sin(1), np.cos(1)]])
        assert structure_flag(rot) == "unitary"

    def test_predicates(self):
        assert is_hermitian(np.eye(2)) and not is_antihermitian(np.eye(2))
        assert is_antihermitian(1j * np.eye(2))

    def test_tolerances_positive(self):
        with pytest.raises(ValueError):
            Tolerances(alg=0.0)
        assert DEFAULT_TOL.min == 1e-9 and DEFAULT_TOL.quad == 1e-8


class TestPivotSolve:
    def test_orthogonality(self):
        rng = np.random.default_rng(5)
        S = rng.standard_normal((6, 6))
        S = (S + S.T) / 2
        t = pivot_orthogonal_diagonal(S, 2)
        T = S - np.diag(np.diag(S)) + np.diag(t)
        inner = T[:, 2] @ T
        inner[2] = 0
        assert t[2] == 0 and np.max(np.abs(inner)) < 1e-12

    def test_singular(self):
        S = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0.0]])
        with pytest.raises(SingularSystemError):
            pivot_orthogonal_diagonal(S, 0)

    def test_rejects_complex(self):
        with pytest.raises(StructureError):
            pivot_orthogonal_diagonal(np.array([[0, 1j], [-1j, 0]]), 0)
