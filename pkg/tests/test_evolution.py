import numpy as np
import pytest

from ramsey_gf import evolution as ev
from ramsey_gf.spin_system import (DimensionError, HamiltonianSpec, apply_parity, build_hamiltonian,
                                   diagonalize, diagonalize_tfim, initial_state, pauli)
from ramsey_gf.trap_chain import TrapParams, solve_chain
from ramsey_gf.units import to_angular

from conftest import make_couplings
from oracles import random_couplings


@pytest.fixture(scope="module")
def chain4():
    return solve_chain(TrapParams(ion_count=4)).couplings


def test_coefficients_are_the_gauss_set():
    c1, c2 = ev.GAUSS_NODES
    assert abs(c1 - (0.5 - np.sqrt(3) / 6)) < 1e-15 and abs(c2 - (0.5 + np.sqrt(3) / 6)) < 1e-15
    (a11, a12), (a21, a22) = ev.CFET4_COEFFS
    assert a11 == a22 == (3 + 2 * np.sqrt(3)) / 12
    assert a12 == a21 == (3 - 2 * np.sqrt(3)) / 12


def test_schedule():
    s = ev.RampSchedule.standard(6.0, 0.5)
    assert s.B0 == 60.0 and abs(s.tau - 0.85 / 6) < 1e-15
    assert abs(s.field_at(s.t0) - 3.0) < 1e-12
    t = np.linspace(0, s.t0, 50)
    assert np.all(np.diff(s.field_at(t)) < 0)
    with pytest.raises(ValueError):
        ev.RampSchedule(1.0, 1.0, 2.0)


@pytest.mark.parametrize("n", [3, 7])  # dense Pade and Lanczos paths
def test_constant_field_step_is_exact(n):
    cm = make_couplings(random_couplings(n, np.random.default_rng(n)))
    j0 = to_angular(cm.J0)
    B = 0.8 * j0
    dt = 1e-3 / j0
    psi = initial_state(n)
    stepped = ev.cfet4_step(lambda t: B, cm, 0.0, dt, psi)
    eig = diagonalize_tfim(HamiltonianSpec(cm, B))
    exact = ev.evolve_constant(eig, psi, dt)
    assert np.linalg.norm(stepped - exact) < 1e-10
    assert abs(np.linalg.norm(stepped) - 1) < 1e-12


def test_zero_step_is_identity(chain4):
    psi = initial_state(4)
    out = ev.cfet4_step(lambda t: 3.0, chain4, 0.0, 0.0, psi)
    assert np.allclose(out, psi, atol=1e-15)


def test_lanczos_against_dense_expm():
    rng = np.random.default_rng(0)
    cm = make_couplings(random_couplings(8, rng))
    spec = HamiltonianSpec(cm, 4.0)
    H = build_hamiltonian(spec)
    v = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    v /= np.linalg.norm(v)
    import scipy.linalg
    for dt in (1e-4, 0.05, 0.4):
        ref = scipy.linalg.expm(-1j * dt * H) @ v
        out = ev.expm_multiply_hermitian(lambda x: H @ x, v, dt)
        assert np.linalg.norm(out - ref) < 1e-11


def test_order_four(chain4):
    j0 = to_angular(chain4.J0)
    s = ev.RampSchedule.standard(j0, 0.94)
    psi = initial_state(4)
    run = lambda n: ev.evolve_ramp(s, chain4, psi, ev.CfetConfig(s.t0 / n, adaptive=False))
    ref = run(1024)
    e1 = np.linalg.norm(run(64) - ref)
    e2 = np.linalg.norm(run(128) - ref)
    assert 13 <= e1 / e2 <= 19


def test_adaptive_refinement_converges(chain4):
    j0 = to_angular(chain4.J0)
    s = ev.RampSchedule.standard(j0, 0.5)
    cfg = ev.CfetConfig.default_for(j0)
    psi, steps = ev.evolve_ramp(s, chain4, initial_state(4), cfg, return_steps=True)
    finer = ev.evolve_ramp(s, chain4, initial_state(4), ev.CfetConfig(s.t0 / (2 * steps), adaptive=False))
    assert np.linalg.norm(psi - finer) < 1e-8
    assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_slow_ramp_is_adiabatic():
    cm = solve_chain(TrapParams(ion_count=6)).couplings
    j0 = to_angular(cm.J0)
    s = ev.RampSchedule.standard(j0, 0.94, tau_j0=50.0)
    psi = ev.evolve_ramp(s, cm, initial_state(6), ev.CfetConfig(s.t0 / 400, adaptive=False))
    ground = np.linalg.eigh(build_hamiltonian(HamiltonianSpec(cm, s.target)))[1][:, 0]
    assert abs(np.vdot(ground, psi)) ** 2 > 0.95


def test_sudden_ramp_leaves_state(chain4):
    j0 = to_angular(chain4.J0)
    s = ev.RampSchedule.standard(j0, 0.94, tau_j0=1e-5)
    psi0 = initial_state(4)
    psi = ev.evolve_ramp(s, chain4, psi0, ev.CfetConfig.default_for(j0))
    assert abs(np.vdot(psi0, psi)) ** 2 > 0.999


def test_parity_conserved_through_ramp(ramped6):
    psi = ramped6.psi0
    assert abs(np.vdot(psi, apply_parity(psi)) - 1) < 1e-10
    assert abs(np.vdot(initial_state(6), apply_parity(initial_state(6))) - 1) < 1e-12


def test_constant_evolution_properties():
    cm = make_couplings(random_couplings(6, np.random.default_rng(2)))
    j0 = to_angular(cm.J0)
    eig = diagonalize_tfim(HamiltonianSpec(cm, 0.7 * j0))
    psi = initial_state(6)
    assert np.allclose(ev.evolve_constant(eig, psi, 0.0), psi, atol=1e-13)
    a = ev.evolve_constant(eig, ev.evolve_constant(eig, psi, 0.3), 0.45)
    assert np.allclose(a, ev.evolve_constant(eig, psi, 0.75), atol=1e-12)
    assert abs(np.linalg.norm(a) - 1) < 1e-12
    v = eig.vectors[:, 3]
    out = ev.evolve_constant(eig, v, 1.7)
    z = pauli("z", 2, 6)
    assert abs(np.vdot(out, z @ out) - np.vdot(v, z @ v)) < 1e-12
    with pytest.raises(DimensionError):
        ev.evolve_constant(eig, np.ones(8), 1.0)


def test_constant_evolution_matches_stepping():
    cm = make_couplings(random_couplings(6, np.random.default_rng(8)))
    j0 = to_angular(cm.J0)
    B = 1.1 * j0
    eig = diagonalize_tfim(HamiltonianSpec(cm, B))
    psi = initial_state(6)
    T = 1.0 / j0
    n = 200
    step = psi
    for k in range(n):
        step = ev.cfet4_step(lambda t: B, cm, k * T / n, T / n, step)
    assert np.linalg.norm(step - ev.evolve_constant(eig, psi, T)) < 1e-9


def test_array_times_give_columns():
    cm = make_couplings(random_couplings(3, np.random.default_rng(1)))
    eig = diagonalize(build_hamiltonian(HamiltonianSpec(cm, 2.0)))
    psi = initial_state(3)
    cols = ev.evolve_constant(eig, psi, np.array([0.0, 0.2]))
    assert cols.shape == (8, 2)
    assert np.allclose(cols[:, 1], ev.evolve_constant(eig, psi, 0.2))
