import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramsey_gf import ramsey
from ramsey_gf.ramsey import (ContractError, ProtocolParams, _rotation, green_direct, green_lehmann,
                              green_site_traces, loschmidt_green, ramsey_measure, rotate_global,
                              rotate_single)
from ramsey_gf.spin_system import (HamiltonianSpec, build_hamiltonian, diagonalize_tfim, initial_state)
from ramsey_gf.trap_chain import CouplingMatrix
from ramsey_gf.units import to_angular

from conftest import make_couplings
from oracles import SX, SZ, green_expm, random_couplings, single_spin_green, site_op, tfim


def test_rotation_matrices():
    for phi in np.linspace(0, 2 * np.pi, 7):
        R = _rotation(phi)
        assert np.allclose(R.conj().T @ R, np.eye(2))
    R0 = _rotation(0.0)
    assert np.allclose(R0, (np.eye(2) + 1j * SX) / np.sqrt(2))
    assert np.allclose(R0 @ R0, 1j * SX)
    # the read-out rotation maps Z onto -X
    R = _rotation(np.pi / 2)
    assert np.allclose(R.conj().T @ SZ @ R, -SX)


def test_rotations_act_on_the_right_site():
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    R = _rotation(0.3)
    assert np.allclose(rotate_single(psi, 1, 0.3), site_op(R, 1, 3) @ psi)
    full = site_op(R, 0, 3) @ site_op(R, 1, 3) @ site_op(R, 2, 3)
    assert np.allclose(rotate_global(psi, 0.3), full @ psi)


def _single(B):
    cm = CouplingMatrix(np.zeros((1, 1)), 1.0)
    eig = diagonalize_tfim(HamiltonianSpec(cm, B))
    return eig


@pytest.mark.parametrize("B", [0.5, 3.0])
def test_single_spin_closed_form(B):
    eig = _single(B)
    t = np.linspace(0, 4, 41)
    for psi, sy in ((initial_state(1), 1.0), (np.array([1, -1j]) / np.sqrt(2), -1.0)):
        ref = single_spin_green(B, sy, t)
        assert np.allclose(green_direct(psi, eig, 0, 0, t), ref, atol=1e-12)
        assert np.allclose(2 * ramsey_measure(psi, eig, ProtocolParams(0, 0), t), ref, atol=1e-12)
        assert np.allclose(green_lehmann(eig.overlaps(psi), eig, 0, 0, t), ref, atol=1e-12)


def test_zero_field_nonlocal_vanishes():
    J = random_couplings(4, np.random.default_rng(5))
    cm = make_couplings(J)
    eig = diagonalize_tfim(HamiltonianSpec(cm, 0.0))
    t = np.linspace(0, 3, 31)
    for j in range(4):
        assert np.abs(green_direct(initial_state(4), eig, 0, j, t)).max() < 1e-12


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_routes_agree_on_ramped_states(random_ramped, n):
    st_ = random_ramped[n]
    t = np.linspace(0, 3.0, 97)
    c = st_.eig.overlaps(st_.psi0)
    for i, j in ((0, 0), (0, n - 1), (1, n // 2)):
        g = green_direct(st_.psi0, st_.eig, i, j, t)
        scale = max(1.0, np.abs(g).max())
        assert np.abs(2 * ramsey_measure(st_.psi0, st_.eig, ProtocolParams(i, j), t) - g).max() < 1e-10 * scale
        assert np.abs(green_lehmann(c, st_.eig, i, j, t) - g).max() < 1e-10 * scale
        assert np.abs(green_site_traces(st_.psi0, st_.eig, i, [j], t)[0] - g).max() < 1e-10 * scale


def test_matches_dense_expm_oracle(random_ramped):
    st_ = random_ramped[4]
    H = tfim(to_angular(st_.couplings.J), st_.field)
    t = np.linspace(0, 2, 9)
    for i, j in ((0, 0), (1, 3), (3, 2)):
        ref = green_expm(H, st_.psi0, i, j, t)
        assert np.allclose(green_direct(st_.psi0, st_.eig, i, j, t), ref, atol=1e-9)


def test_zero_time_values(random_ramped):
    st_ = random_ramped[6]
    for j in range(6):
        assert abs(green_direct(st_.psi0, st_.eig, 2, j, 0.0)) < 1e-12


def test_causality(random_ramped):
    st_ = random_ramped[4]
    t = np.array([-1.0, -1e-3, 0.5])
    g = green_direct(st_.psi0, st_.eig, 0, 1, t)
    assert g[0] == 0.0 and g[1] == 0.0
    assert green_site_traces(st_.psi0, st_.eig, 0, [1], t)[0][1] == 0.0
    with pytest.raises(ValueError):
        ramsey_measure(st_.psi0, st_.eig, ProtocolParams(0, 1), -0.1)


def test_reflection_symmetric_chain(ramped6):
    # the trapped chain is mirror symmetric, so G_ij = G_{N-1-i, N-1-j}
    t = np.linspace(0, 2, 41)
    for i, j in ((0, 0), (0, 2), (1, 4)):
        a = green_direct(ramped6.psi0, ramped6.eig, i, j, t)
        b = green_direct(ramped6.psi0, ramped6.eig, 5 - i, 5 - j, t)
        assert np.allclose(a, b, atol=1e-9)


def test_site_range():
    eig = _single(1.0)
    with pytest.raises(IndexError):
        green_direct(initial_state(1), eig, 0, 1, 0.5)


def test_loschmidt_route(random_ramped):
    st_ = random_ramped[4]
    t = np.linspace(0, 2, 33)
    for i in range(4):
        flip = ramsey.flipped_eigendecomposition(st_.eig, i)
        g = loschmidt_green(st_.psi0, st_.eig, flip, i, t)
        assert np.allclose(g, green_direct(st_.psi0, st_.eig, i, i, t), atol=1e-10)
    with pytest.raises(ContractError):
        loschmidt_green(st_.psi0, st_.eig, flip, 0, t, j=1)


def test_flipped_decomposition_diagonalises_flipped_hamiltonian(random_ramped):
    st_ = random_ramped[4]
    H = tfim(to_angular(st_.couplings.J), st_.field)
    X1 = site_op(SX, 1, 4)
    flip = ramsey.flipped_eigendecomposition(st_.eig, 1)
    Hf = X1 @ H @ X1
    assert np.allclose(Hf @ flip.vectors, flip.vectors * flip.energies, atol=1e-9)


def test_reflected_echo_only_for_eigenstates(random_ramped):
    st_ = random_ramped[4]
    t = np.linspace(0, 2, 33)
    flip = ramsey.flipped_eigendecomposition(st_.eig, 0)
    eigst = st_.eig.vectors[:, 0]
    a = loschmidt_green(eigst, st_.eig, flip, 0, t, reflected=True)
    assert np.allclose(a, green_direct(eigst, st_.eig, 0, 0, t), atol=1e-10)
    # a superposition of eigenstates breaks the L(-t) = conj L(t) identity
    b = loschmidt_green(st_.psi0, st_.eig, flip, 0, t, reflected=True)
    assert np.abs(b - green_direct(st_.psi0, st_.eig, 0, 0, t)).max() > 1e-3


@given(seed=st.integers(0, 2 ** 31), B=st.floats(0.1, 20), t=st.floats(0, 3))
@settings(max_examples=20, deadline=None)
def test_real_and_bounded(seed, B, t):
    rng = np.random.default_rng(seed)
    cm = make_couplings(random_couplings(3, rng))
    eig = diagonalize_tfim(HamiltonianSpec(cm, B))
    psi = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    psi /= np.linalg.norm(psi)
    g = green_direct(psi, eig, 0, 2, t)
    assert isinstance(g, float) and abs(g) <= 2.0 + 1e-12


def test_scan_methods_agree(ramped4):
    ref = ramsey.scan_trace(ramped4, 0, 2, T=2.0, samples=81)
    for method in ("protocol", "heisenberg"):
        other = ramsey.scan_trace(ramped4, 0, 2, T=2.0, samples=81, method=method)
        assert np.allclose(ref.values, other.values, atol=1e-10)
    assert abs(ref.dt - 0.025) < 1e-15
    assert ref.fingerprint["N"] == 4 and ref.fingerprint["B_over_J0"] == 0.74
    with pytest.raises(ValueError):
        ramsey.scan_trace(ramped4, 0, 2, method="nope")
    many = ramsey.scan_site_traces(ramped4, 0, range(4), 2.0, 81)
    assert np.allclose(many[2].values, ref.values, atol=1e-10)


def test_eigenstate_preparation():
    cm = make_couplings(random_couplings(3, np.random.default_rng(2)))
    st_ = ramsey.prepare_eigenstate(cm, 2.0, level=1)
    H = build_hamiltonian(HamiltonianSpec(cm, 2.0))
    assert np.allclose(H @ st_.psi0, st_.eig.energies[1] * st_.psi0)
