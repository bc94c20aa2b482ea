import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridprop.errors import InvariantViolation, RejectedInput
from hybridprop.operators import (SIGMA_X, SIGMA_Y, SIGMA_Z, annihilation, as_operator, as_state, commutator,
                                  conjugate_by_unitary, expectation, ground_state, hermitian_defect, normalize)


def random_hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


def random_unitary(rng, n):
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(Z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def matmul_loops(A, B):
    n = A.shape[0]
    C = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                C[i, j] += A[i, k] * B[k, j]
    return C


def test_pauli_commutator():
    np.testing.assert_allclose(commutator(SIGMA_X, SIGMA_Y), 2j * SIGMA_Z, atol=0)


def test_self_commutator_vanishes():
    A = np.random.default_rng(3).normal(size=(5, 5))
    assert np.all(commutator(A, A) == 0)


def test_truncated_canonical_commutator():
    hbar, m, w = 1.0, 1.0, 1.0
    a = np.zeros((4, 4))
    for n in range(1, 4):
        a[n - 1, n] = np.sqrt(n)
    ad = a.T
    q = np.sqrt(hbar / (2 * m * w)) * (a + ad)
    p = 1j * np.sqrt(hbar * m * w / 2) * (ad - a)
    expected = 1j * hbar * np.diag([1, 1, 1, -3])
    np.testing.assert_allclose(commutator(q, p), expected, atol=1e-14)
    np.testing.assert_allclose(matmul_loops(q, p) - matmul_loops(p, q), expected, atol=1e-14)


def test_commutator_dimension_mismatch():
    with pytest.raises(RejectedInput):
        commutator(np.eye(2), np.eye(3))


def test_expectation_examples():
    assert expectation(SIGMA_Z, np.array([1, 0])) == 1
    assert expectation(SIGMA_X, np.array([1, 1]) / np.sqrt(2)) == pytest.approx(1, abs=1e-15)


def test_expectation_matches_double_sum():
    rng = np.random.default_rng(7)
    A = random_hermitian(rng, 3)
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi /= np.linalg.norm(psi)
    brute = sum(np.conj(psi[j]) * A[j, k] * psi[k] for j in range(3) for k in range(3))
    value = expectation(A, psi)
    assert abs(value - brute) <= 1e-14
    assert abs(value.imag) <= 1e-12


def test_expectation_dimension_mismatch():
    with pytest.raises(RejectedInput):
        expectation(np.eye(3), np.array([1.0, 0.0]))


def test_conjugate_trivial_cases():
    rng = np.random.default_rng(0)
    A = random_hermitian(rng, 4)
    U = random_unitary(rng, 4)
    np.testing.assert_allclose(conjugate_by_unitary(A, np.eye(4)), A, atol=0)
    np.testing.assert_allclose(conjugate_by_unitary(np.eye(4), U), np.eye(4), atol=1e-14)


def test_conjugate_rotation_about_z():
    theta = np.pi / 2
    U = np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])
    # (U^dagger sx U)_{01} = conj(U_00) U_11 = i, (..)_{10} = -i
    hand = np.array([[0, 1j], [-1j, 0]])
    np.testing.assert_allclose(conjugate_by_unitary(SIGMA_X, U), hand, atol=1e-15)
    np.testing.assert_allclose(hand, -SIGMA_Y)
    np.testing.assert_allclose(matmul_loops(matmul_loops(U.conj().T, SIGMA_X), U), hand, atol=1e-15)


def test_conjugate_rejects_non_unitary():
    with pytest.raises(InvariantViolation):
        conjugate_by_unitary(SIGMA_X, 1.1 * np.eye(2))


def test_as_operator_and_state_invariants():
    with pytest.raises(InvariantViolation):
        as_operator([[0, 1], [0, 0]], hermitian=True)
    with pytest.raises(InvariantViolation):
        as_state([1.0, 1.0])
    A = as_operator(SIGMA_X, hermitian=True)
    assert not A.flags.writeable
    psi, change = normalize([3.0, 4.0])
    np.testing.assert_allclose(psi, [0.6, 0.8])
    assert change == pytest.approx(4.0)


def test_annihilation_entries():
    a = annihilation(4)
    assert a[0, 1] == 1 and a[1, 2] == pytest.approx(np.sqrt(2)) and a[2, 3] == pytest.approx(np.sqrt(3))
    assert np.count_nonzero(a) == 3


@pytest.mark.parametrize("n", [2, 5, 16])
def test_ground_state_is_lowest_eigenvector(n):
    rng = np.random.default_rng(n)
    H = random_hermitian(rng, n)
    psi = ground_state(H)
    w, v = np.linalg.eigh(H)
    assert abs(np.vdot(v[:, 0], psi)) == pytest.approx(1, abs=1e-10)
    assert expectation(H, psi).real == pytest.approx(w[0], abs=1e-10)


hermitian_pairs = st.integers(min_value=1, max_value=6).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(min_value=0, max_value=2**31 - 1)))


@settings(max_examples=50, deadline=None)
@given(hermitian_pairs)
def test_commutator_hermiticity_closure(pair):
    n, seed = pair
    rng = np.random.default_rng(seed)
    A, B = random_hermitian(rng, n), random_hermitian(rng, n)
    assert hermitian_defect(1j * commutator(A, B)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(hermitian_pairs)
def test_conjugation_preserves_trace_and_hermiticity(pair):
    n, seed = pair
    rng = np.random.default_rng(seed)
    A, U = random_hermitian(rng, n), random_unitary(rng, n)
    Ah = conjugate_by_unitary(A, U)
    assert abs(np.trace(Ah) - np.trace(A)) <= 1e-10
    assert hermitian_defect(Ah) <= 1e-12
    np.testing.assert_allclose(np.linalg.eigvalsh(Ah), np.linalg.eigvalsh(A), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(hermitian_pairs)
def test_expectation_is_additive(pair):
    n, seed = pair
    rng = np.random.default_rng(seed)
    A, B = random_hermitian(rng, n), random_hermitian(rng, n)
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    psi /= np.linalg.norm(psi)
    lhs = expectation(A + B, psi)
    rhs = expectation(A, psi) + expectation(B, psi)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
