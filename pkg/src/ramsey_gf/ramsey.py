"""Ramsey protocol and three routes to the pure-state retarded Green's function.

G_ij(t) = -i theta(t) <psi0| [X_i(t), X_j(0)] |psi0>, with t measured from the
start of the Ramsey interval (t0 relabelled to 0) and a constant Hamiltonian
during the interval.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import evolution as ev
from .spin_system import (EigenDecomposition, HamiltonianSpec, apply_local, diagonalize_tfim,
                          initial_state, n_sites, _check_site)
from .trap_chain import CouplingMatrix
from .units import to_angular

log = logging.getLogger(__name__)

IMAG_TOL = 1e-10
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0, -1.0]).astype(complex)
_TIME_CHUNK = 512


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    measured_site: int
    rotated_site: int
    phi1: float = 0.0
    phi2: float = np.pi / 2


@dataclass
class RamseyTrace:
    times: np.ndarray  # ms
    values: np.ndarray
    i: int
    j: int
    fingerprint: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class PreparedState:
    """psi0 after the ramp together with the final-Hamiltonian eigenbasis."""
    couplings: CouplingMatrix
    field: float  # B(t0), rad/ms
    psi0: np.ndarray
    eig: EigenDecomposition
    fingerprint: dict
    ramp_steps: int = 0

    @property
    def ion_count(self) -> int:
        return self.couplings.ion_count

    @property
    def j0_angular(self) -> float:
        return to_angular(self.couplings.J0)


def fingerprint_hash(fp: dict) -> str:
    blob = json.dumps(fp, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def prepare_state(couplings: CouplingMatrix, target_ratio: float, *, b0_ratio: float = 10.0,
                  tau_j0: float = 0.85, cfet: ev.CfetConfig | None = None,
                  alpha: float | None = None, seed: int = 0,
                  psi_init: np.ndarray | None = None) -> PreparedState:
    """Ramp the field from b0_ratio*J0 down to target_ratio*J0 and diagonalise H(t0)."""
    j0 = to_angular(couplings.J0)
    n = couplings.ion_count
    schedule = ev.RampSchedule.standard(j0, target_ratio, b0_ratio=b0_ratio, tau_j0=tau_j0)
    cfet = cfet or ev.CfetConfig.default_for(j0)
    start = initial_state(n) if psi_init is None else psi_init
    psi0, steps = ev.evolve_ramp(schedule, couplings, start, cfet, return_steps=True)
    eig = diagonalize_tfim(HamiltonianSpec(couplings, schedule.target))
    fp = {"N": n, "alpha": None if alpha is None else round(float(alpha), 6),
          "B_over_J0": float(target_ratio), "B0_over_J0": float(b0_ratio),
          "tau_J0": float(tau_j0), "j0_convention": couplings.j0_convention, "seed": int(seed)}
    return PreparedState(couplings, schedule.target, psi0, eig, fp, steps)


def prepare_eigenstate(couplings: CouplingMatrix, field: float, level: int = 0) -> PreparedState:
    """psi0 = an eigenstate of the constant Hamiltonian (no ramp)."""
    eig = diagonalize_tfim(HamiltonianSpec(couplings, field))
    fp = {"N": couplings.ion_count, "field": float(field), "level": level}
    return PreparedState(couplings, field, eig.vectors[:, level].copy(), eig, fp)


# --- rotations ---------------------------------------------------------------

def _rotation(phi):
    return (np.eye(2) + 1j * (_X * np.cos(phi) - _Y * np.sin(phi))) / np.sqrt(2.0)


def rotate_single(psi: np.ndarray, j: int, phi1: float) -> np.ndarray:
    """R_j(phi) = [1 + i(X_j cos phi - Y_j sin phi)] / sqrt(2)."""
    return apply_local(_rotation(phi1), j, psi)


def rotate_global(psi: np.ndarray, phi2: float) -> np.ndarray:
    n = n_sites(np.asarray(psi).shape[0])
    r = _rotation(phi2)
    for k in range(n):
        psi = apply_local(r, k, psi)
    return psi


def _x_rows(a, site):
    """X_site applied to a vector or to each column of a matrix."""
    idx = np.arange(a.shape[0]) ^ (1 << site)
    return a[idx]


def _z_diag(dim, site):
    return np.where((np.arange(dim) >> site) & 1, -1.0, 1.0)


def _as_times(t):
    t = np.asarray(t, dtype=float)
    return t, t.ndim == 0


def _finish(values, scalar, t, causal):
    if causal:
        values = np.where(t.reshape(-1) < 0, 0.0, values)
    return float(values[0]) if scalar else values


def ramsey_measure(psi0: np.ndarray, eig: EigenDecomposition, p: ProtocolParams, t):
    """<psi(t)| Z_i |psi(t)> with psi(t) = R(phi2) U(t) R_j(phi1) psi0."""
    t, scalar = _as_times(t)
    if np.any(t < 0):
        raise ValueError("the Ramsey protocol is only defined for t >= 0")
    dim = eig.dim
    zi = _z_diag(dim, p.measured_site)
    psi1 = rotate_single(psi0, p.rotated_site, p.phi1)
    out = []
    tt = t.reshape(-1)
    for k in range(0, len(tt), _TIME_CHUNK):
        states = ev.evolve_constant(eig, psi1, tt[k:k + _TIME_CHUNK])
        states = rotate_global(states, p.phi2)
        out.append(np.real(np.einsum("dt,d,dt->t", states.conj(), zi, states)))
    vals = np.concatenate(out)
    return float(vals[0]) if scalar else vals


def green_direct(psi0: np.ndarray, eig: EigenDecomposition, i: int, j: int, t, *,
                 causal: bool = True):
    """G_ij(t) from the two evolved states U(t) X_j psi0 and U(t) psi0.

    With ``causal=False`` the commutator expression is returned for t < 0
    as well (the analytic continuation used for derivatives at 0+).
    """
    n = n_sites(eig.dim)
    _check_site(i, n)
    _check_site(j, n)
    t, scalar = _as_times(t)
    tt = t.reshape(-1)
    a = eig.overlaps(psi0)
    b = eig.overlaps(_x_rows(psi0, j))
    out = []
    for k in range(0, len(tt), _TIME_CHUNK):
        ph = np.exp(-1j * np.outer(eig.energies, tt[k:k + _TIME_CHUNK]))
        u = eig.vectors @ (ph * a[:, None])  # U(t) psi0
        w = eig.vectors @ (ph * b[:, None])  # U(t) X_j psi0
        z1 = np.einsum("dt,dt->t", u.conj(), _x_rows(w, i))
        z2 = np.einsum("dt,dt->t", w.conj(), _x_rows(u, i))
        g = -1j * (z1 - z2)
        _check_real(g)
        out.append(g.real)
    return _finish(np.concatenate(out), scalar, t, causal)


def _check_real(g):
    bad = np.abs(g.imag).max(initial=0.0)
    if bad > IMAG_TOL * max(1.0, np.abs(g.real).max(initial=0.0)):
        raise ArithmeticError(f"Green's function has imaginary residue {bad:.3e}")


def green_site_traces(psi0: np.ndarray, eig: EigenDecomposition, i: int, js, t) -> np.ndarray:
    """G_ij(t) for several j at once via X_i(t) psi0 in the eigenbasis.

    Returns an array of shape (len(js), len(t)). One matrix product per time
    chunk serves every j, which is what the sweeps over target sites use.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c = eig.overlaps(psi0)
    xi = eig.x_elements(i)
    bj = np.column_stack([eig.overlaps(_x_rows(psi0, j)) for j in js])
    out = np.empty((len(js), len(t)))
    for k in range(0, len(t), _TIME_CHUNK):
        ph = np.exp(-1j * np.outer(eig.energies, t[k:k + _TIME_CHUNK]))
        chi = ph.conj() * (xi @ (ph * c[:, None]))  # <n| X_i(t) |psi0>
        z = chi.conj().T @ bj  # <psi0| X_i(t) X_j |psi0>
        out[:, k:k + _TIME_CHUNK] = 2.0 * z.imag.T
    return np.where(t[None, :] < 0, 0.0, out)


def green_lehmann(c: np.ndarray, eig: EigenDecomposition, i: int, j: int, t):
    """Generalised Lehmann sum with the C*_m C_n cross terms kept."""
    if abs(np.vdot(c, c).real - 1.0) > 1e-10:
        raise ValueError("overlaps are not normalised")
    t, scalar = _as_times(t)
    tt = t.reshape(-1)
    xi = eig.x_elements(i)
    xj = eig.x_elements(j)
    xjc = xj @ c  # sum_n <n'|X_j|n> C_n
    cxj = c.conj() @ xj  # sum_m C*_m <m|X_j|n'>
    out = []
    for k in range(0, len(tt), _TIME_CHUNK):
        ph = np.exp(-1j * np.outer(eig.energies, tt[k:k + _TIME_CHUNK]))
        # sum_{m,n'} C*_m e^{-i(E_n' - E_m)t} <m|X_i|n'> <n'|X_j C>
        first = np.einsum("dt,dt->t", (c.conj()[:, None] * ph.conj()), xi @ (ph * xjc[:, None]))
        # sum_{n',n} <C X_j|n'> e^{-i(E_n - E_n')t} <n'|X_i|n> C_n
        second = np.einsum("dt,dt->t", cxj[:, None] * ph.conj(), xi @ (ph * c[:, None]))
        g = -1j * (first - second)
        _check_real(g)
        out.append(g.real)
    return _finish(np.concatenate(out), scalar, t, True)


def flipped_eigendecomposition(eig: EigenDecomposition, i: int) -> EigenDecomposition:
    """Eigenbasis of X_i H X_i: same energies, vectors X_i|n>, parity reversed."""
    return EigenDecomposition(eig.energies, _x_rows(eig.vectors, i), -eig.parity, eig.norm)


def loschmidt_echo(psi: np.ndarray, eig_h0: EigenDecomposition, eig_h: EigenDecomposition, t):
    """L(t) = <psi| exp(i H0 t) exp(-i H t) |psi>."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    back = ev.evolve_constant(eig_h0, psi, t)
    fwd = ev.evolve_constant(eig_h, psi, t)
    return np.einsum("dt,dt->t", back.conj(), fwd)


def loschmidt_green(psi0: np.ndarray, eig_h0: EigenDecomposition, eig_h: EigenDecomposition,
                    i: int, t, *, j: int | None = None, reflected: bool = False):
    """Local G_ii(t) from the Loschmidt echo with H = X_i H0 X_i.

    The commutator gives G = -i [L(t) - conj(L(t))]. ``reflected=True`` uses
    L(-t) in place of conj(L(t)); the two agree when psi0 is stationary under
    H0 but not for a superposition of eigenstates.
    """
    if j is not None and j != i:
        raise ContractError(f"Loschmidt route gives only local G_ii, got i={i}, j={j}")
    t, scalar = _as_times(t)
    tt = t.reshape(-1)
    L = loschmidt_echo(psi0, eig_h0, eig_h, tt)
    other = loschmidt_echo(psi0, eig_h0, eig_h, -tt) if reflected else L.conj()
    g = -1j * (L - other)
    if not reflected:
        _check_real(g)
    return _finish(np.real(g), scalar, t, True)


def scan_trace(state: PreparedState, i: int, j: int, T: float = 6.0, samples: int = 601,
               method: str = "direct") -> RamseyTrace:
    """Uniform-grid trace of G_ij on [0, T]."""
    if samples < 2:
        raise ValueError("need at least two samples")
    t = np.linspace(0.0, T, samples)
    if method == "direct":
        g = green_direct(state.psi0, state.eig, i, j, t)
    elif method == "protocol":
        g = 2.0 * ramsey_measure(state.psi0, state.eig, ProtocolParams(i, j), t)
    elif method == "heisenberg":
        g = green_site_traces(state.psi0, state.eig, i, [j], t)[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    return RamseyTrace(t, g, i, j, dict(state.fingerprint))


def scan_site_traces(state: PreparedState, i: int, js, T: float, samples: int) -> list[RamseyTrace]:
    t = np.linspace(0.0, T, samples)
    g = green_site_traces(state.psi0, state.eig, i, list(js), t)
    return [RamseyTrace(t, g[k], i, j, dict(state.fingerprint)) for k, j in enumerate(js)]
