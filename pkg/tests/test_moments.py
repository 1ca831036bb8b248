import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramsey_gf.moments import (MomentReport, StepUnderflowError, analytic_moments, default_step,
                               derivatives_at_zero, numeric_moments, spectral_function)
from ramsey_gf.ramsey import RamseyTrace, green_direct
from ramsey_gf.spin_system import initial_state
from ramsey_gf.units import to_angular

from conftest import make_couplings
from oracles import SX, SY, SZ, commutator_derivatives, random_couplings, site_op, tfim


def _random_state(rng, dim):
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def _single_spin_green(B, sy):
    return lambda t: -2.0 * np.sin(2.0 * B * np.asarray(t)) * sy


@pytest.mark.parametrize("B", [0.7, 2.5])
@pytest.mark.parametrize("up", [True, False])
def test_single_spin_moments(B, up):
    psi = initial_state(1) if up else np.array([1, -1j]) / np.sqrt(2)
    sy = 1.0 if up else -1.0
    a = analytic_moments(psi, np.zeros((1, 1)), B, 0, 0).analytic
    assert np.allclose(a, [0, 4 * B / np.pi * sy, 0, 8 * B ** 3 / np.pi * sy], atol=1e-12)
    rep = numeric_moments(_single_spin_green(B, sy), h=1e-2 / B, i=0, j=0)
    assert np.allclose(rep.numeric, [0, 4 * B * sy, 0, 16 * B ** 3 * sy], rtol=1e-8, atol=1e-8)
    assert np.allclose(rep.derivatives, [0, -4 * B * sy, 0, 16 * B ** 3 * sy], rtol=1e-8, atol=1e-8)


def _oracle_onsite_mu3(J, B, psi, i):
    """Diagonal closed-form cubic term evaluated with dense kron matrices."""
    n = J.shape[0]
    X = [site_op(SX, k, n) for k in range(n)]
    Y = [site_op(SY, k, n) for k in range(n)]
    Z = [site_op(SZ, k, n) for k in range(n)]
    ev = lambda A: np.vdot(psi, A @ psi).real
    S = sum(J[i, k] * X[k] for k in range(n))
    val = B * ev(16 * B ** 2 * Y[i] + S @ S @ Y[i]) / (2 * np.pi)
    val += 4 / np.pi * B ** 2 * sum(J[i, k] * (ev(X[k] @ X[i]) + ev(Z[k] @ Z[i])) for k in range(n))
    val -= 8 / np.pi * B ** 2 * J[i, i] * ev(Y[i] @ Y[i])
    return val


@given(seed=st.integers(0, 2 ** 31), B=st.floats(0.2, 5.0))
@settings(max_examples=20, deadline=None)
def test_closed_form_against_commutator_oracle(seed, B):
    rng = np.random.default_rng(seed)
    J = random_couplings(4, rng)
    cm = make_couplings(J)
    Ja = to_angular(J)
    psi = _random_state(rng, 16)
    H = tfim(Ja, B)
    for i, j in ((0, 0), (2, 2), (0, 3), (1, 2)):
        d = commutator_derivatives(H, psi, i, j, 3)
        exact = np.array([-(1j ** n * d[n]).imag for n in range(4)])
        a = analytic_moments(psi, cm, B, i, j).analytic
        assert a[0] == 0.0 and a[2] == 0.0
        assert abs(a[1] - exact[1] / np.pi) < 1e-9 * max(1, abs(exact[1]))
        if i != j:
            assert a[1] == 0.0
            assert abs(a[3] - exact[3] / (2 * np.pi)) < 1e-9 * max(1, abs(exact[3]))
        else:
            assert abs(a[3] - _oracle_onsite_mu3(Ja, B, psi, i)) < 1e-9 * max(1, abs(a[3]))


def test_numeric_matches_commutator_derivatives(random_ramped):
    st_ = random_ramped[6]
    H = tfim(to_angular(st_.couplings.J), st_.field)
    h = default_step(st_.eig.norm)
    for i, j in ((0, 0), (1, 4)):
        g = lambda t: green_direct(st_.psi0, st_.eig, i, j, t, causal=False)
        d = derivatives_at_zero(g, h)
        ref = commutator_derivatives(H, st_.psi0, i, j, 3)
        scale = np.abs(ref).max()
        assert np.allclose(d, ref, atol=1e-6 * scale)


def test_offsite_ratio_constant(ramped6):
    st_ = ramped6
    h = default_step(st_.eig.norm)
    for j in (1, 3, 5):
        g = lambda t: green_direct(st_.psi0, st_.eig, 0, j, t, causal=False)
        rep = analytic_moments(st_.psi0, st_.couplings, st_.field, 0, j).merged(
            numeric_moments(g, h=h, i=0, j=j))
        assert abs(rep.ratios[3] * 2 * np.pi - 1) < 1e-5
        assert np.isnan(rep.ratios[1])


def test_zero_field_gives_zero():
    J = random_couplings(3, np.random.default_rng(0))
    psi = _random_state(np.random.default_rng(1), 8)
    assert np.all(analytic_moments(psi, make_couplings(J), 0.0, 1, 1).analytic == 0)
    assert np.all(analytic_moments(psi, make_couplings(J), 0.0, 0, 2).analytic == 0)


def test_linearity_of_derivatives():
    f = lambda t: np.sin(3 * np.asarray(t))
    g = lambda t: np.exp(0.5 * np.asarray(t))
    h = 1e-2
    a = derivatives_at_zero(lambda t: 2 * f(t) - g(t), h)
    b = 2 * derivatives_at_zero(f, h) - derivatives_at_zero(g, h)
    assert np.allclose(a, b, atol=1e-10)
    assert np.allclose(derivatives_at_zero(f, h), [0, 3, 0, -27], atol=1e-8)
    assert np.allclose(derivatives_at_zero(g, h), [1, 0.5, 0.25, 0.125], atol=1e-8)


def test_step_underflow():
    with pytest.raises(StepUnderflowError):
        derivatives_at_zero(np.sin, 1e-300)
    with pytest.raises(StepUnderflowError):
        derivatives_at_zero(np.sin, 0.0)


def test_report_serialisation():
    rep = MomentReport(0, 1, analytic=np.array([0, 1.0, 0, 2.0]), numeric=np.array([0, 2.0, 0, 4.0]))
    d = rep.as_dict()
    assert d["ratios"] == [None, 0.5, None, 0.5]
    assert MomentReport(0, 0, analytic=np.zeros(4)).as_dict()["ratios"] is None


def test_spectral_function_of_single_spin():
    B = 3.0
    t = np.linspace(0, 20, 4001)
    s = spectral_function(RamseyTrace(t, -2 * np.sin(2 * B * t), 0, 0))
    dw = s.omega[1] - s.omega[0]
    assert abs(s.omega[np.argmax(s.values)] - 2 * B) <= dw
    assert abs(s.omega[np.argmin(s.values)] + 2 * B) <= dw
    assert abs(s.moment(0)) < 1e-8
    assert abs(s.moment(1) - 4 * B) < 1e-6  # first derivative moment
    with pytest.raises(ValueError):
        spectral_function(RamseyTrace(t, t, 0, 0), window="box")
