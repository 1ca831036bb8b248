import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramsey_gf.spin_system import (DimensionError, HamiltonianSpec, apply_hamiltonian, apply_pauli,
                                   apply_pauli_string, build_hamiltonian, coupled_gap, diagonalize,
                                   diagonalize_tfim, expectation, initial_state, parity_operator,
                                   pauli)
from ramsey_gf.trap_chain import CouplingMatrix, TrapParams, solve_chain
from ramsey_gf.units import to_angular

from conftest import make_couplings
from oracles import SX, SY, SZ, random_couplings, site_op, tfim


def test_pauli_algebra():
    x0, y0, y1 = pauli("x", 0, 3), pauli("y", 0, 3), pauli("y", 1, 3)
    assert np.array_equal(x0 @ y0 - y0 @ x0, 2j * pauli("z", 0, 3))
    assert np.array_equal(x0 @ y1 - y1 @ x0, np.zeros((8, 8)))
    assert np.array_equal(x0 @ x0, np.eye(8))


@pytest.mark.parametrize("axis,op", [("x", SX), ("y", SY), ("z", SZ)])
def test_pauli_matches_kron(axis, op):
    for site in range(3):
        assert np.array_equal(pauli(axis, site, 3), site_op(op, site, 3))


def test_site_range_checked():
    with pytest.raises(IndexError):
        pauli("x", 3, 3)
    with pytest.raises(IndexError):
        apply_pauli("x", 5, np.ones(8))


def test_pauli_string_order():
    psi = initial_state(2)
    a = apply_pauli_string([("x", 0), ("z", 0)], psi)  # X Z psi
    assert np.allclose(a, pauli("x", 0, 2) @ pauli("z", 0, 2) @ psi)


def _spec(J, B):
    return HamiltonianSpec(CouplingMatrix(np.asarray(J, float), 1.0), B)


def test_hamiltonian_small_cases():
    h1 = build_hamiltonian(_spec([[0.0]], 1.3))
    assert np.allclose(h1, -1.3 * SY)
    assert np.allclose(np.linalg.eigvalsh(h1), [-1.3, 1.3])
    J = 0.4
    h2 = build_hamiltonian(_spec([[0, J], [J, 0]], 0.0))
    Ja = to_angular(J)
    assert np.allclose(np.linalg.eigvalsh(h2), [-Ja, -Ja, Ja, Ja])


@given(n=st.integers(2, 5), seed=st.integers(0, 2 ** 31), B=st.floats(0, 20))
@settings(max_examples=25, deadline=None)
def test_hamiltonian_matches_oracle_and_commutes_with_parity(n, seed, B):
    J = random_couplings(n, np.random.default_rng(seed))
    spec = HamiltonianSpec(make_couplings(J), B)
    H = build_hamiltonian(spec)
    assert np.allclose(H, tfim(to_angular(J), B), atol=1e-12)
    assert np.allclose(H, H.conj().T)
    P = parity_operator(n)
    assert np.allclose(H @ P, P @ H, atol=1e-10)
    psi = np.random.default_rng(seed).standard_normal(2 ** n) + 0j
    assert np.allclose(apply_hamiltonian(spec, psi), H @ psi, atol=1e-10)


def test_dimension_mismatch():
    spec = _spec(np.zeros((3, 3)), 1.0)
    with pytest.raises(DimensionError):
        apply_hamiltonian(spec, np.ones(4, complex))
    with pytest.raises(DimensionError):
        expectation(np.ones(4), np.eye(8))


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_parity_operator(n):
    P = parity_operator(n)
    assert np.allclose(P @ P, np.eye(2 ** n))
    assert np.allclose(P, P.conj().T)
    for j in range(n):
        assert np.allclose(P @ pauli("x", j, n) @ P, -pauli("x", j, n))
        assert np.allclose(P @ pauli("y", j, n) @ P, pauli("y", j, n))
        assert np.allclose(P @ pauli("z", j, n) @ P, -pauli("z", j, n))


def test_single_spin_diagonalisation():
    eig = diagonalize(build_hamiltonian(_spec([[0.0]], 2.0)))
    assert np.allclose(eig.energies, [-2.0, 2.0])
    # the levels are the sigma_y eigenstates, which carry opposite parity
    assert sorted(eig.parity) == [-1, 1]


def test_random_hermitian_reconstruction():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h = a + a.conj().T
    eig = diagonalize(h)
    V = eig.vectors
    assert np.linalg.norm(h - V @ np.diag(eig.energies) @ V.conj().T) < 1e-10


@pytest.mark.parametrize("B", [0.0, 0.3, 5.0])
def test_eigendecomposition_invariants(B):
    J = random_couplings(5, np.random.default_rng(3))
    spec = HamiltonianSpec(make_couplings(J), B)
    H = build_hamiltonian(spec)
    norm = np.linalg.norm(H, 2)
    P = parity_operator(5)
    for eig in (diagonalize(H), diagonalize_tfim(spec)):
        V = eig.vectors
        assert np.all(np.diff(eig.energies) >= -1e-12)
        assert np.linalg.norm(H @ V - V * eig.energies) < 1e-9 * norm
        assert np.allclose(V.conj().T @ V, np.eye(32), atol=1e-10)
        # each column is a parity eigenvector with the reported label
        assert np.allclose(P @ V, V * eig.parity, atol=1e-9)


def test_real_frame_and_dense_agree():
    J = random_couplings(6, np.random.default_rng(9))
    spec = HamiltonianSpec(make_couplings(J), 4.0)
    a, b = diagonalize(build_hamiltonian(spec)), diagonalize_tfim(spec)
    assert np.allclose(a.energies, b.energies, atol=1e-10)


def test_parity_selection_rule_odd_x_strings():
    J = random_couplings(5, np.random.default_rng(4))
    eig = diagonalize_tfim(HamiltonianSpec(make_couplings(J), 3.0))
    for k in (0, 3, 7):
        psi = eig.vectors[:, k]
        for ops in ([("x", 0)], [("x", 1), ("x", 2), ("x", 4)]):
            assert abs(np.vdot(psi, apply_pauli_string(ops, psi))) < 1e-12


def test_spectrum_reflection_invariant():
    J = random_couplings(5, np.random.default_rng(6))
    e1 = diagonalize_tfim(HamiltonianSpec(make_couplings(J), 2.0)).energies
    e2 = diagonalize_tfim(HamiltonianSpec(make_couplings(J[::-1, ::-1].copy()), 2.0)).energies
    assert np.allclose(e1, e2, atol=1e-10)


def test_initial_state_expectations():
    n = 4
    psi = initial_state(n)
    assert abs(expectation(psi, np.eye(16)) - 1) < 1e-14
    for j in range(n):
        assert abs(expectation(psi, pauli("y", j, n)) - 1) < 1e-14
        assert abs(expectation(psi, pauli("x", j, n))) < 1e-14
    assert abs(expectation(psi, pauli("y", 0, n) @ pauli("y", 2, n)) - 1) < 1e-14
    assert abs(expectation(psi, parity_operator(n)) - 1) < 1e-14


def test_initial_state_is_high_field_ground_state():
    sol = solve_chain(TrapParams(ion_count=10))
    j0 = to_angular(sol.couplings.J0)
    eig = diagonalize_tfim(HamiltonianSpec(sol.couplings, 10 * j0))
    assert abs(np.vdot(eig.vectors[:, 0], initial_state(10))) >= 0.99


def test_expectation_accepts_callables():
    psi = initial_state(3)
    assert abs(expectation(psi, lambda v: apply_pauli("y", 1, v)) - 1) < 1e-14


def test_coupled_gap():
    # one spin: no second level shares the ground-state parity
    assert np.isnan(coupled_gap(diagonalize_tfim(_spec([[0.0]], 1.5))))
    # two spins, no coupling: levels -2B, 0, 0, 2B; the same-parity partner sits at 2B
    eig = diagonalize_tfim(_spec(np.zeros((2, 2)), 1.5))
    assert abs(coupled_gap(eig) - 6.0) < 1e-12
