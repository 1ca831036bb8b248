"""Time evolution: exponential field ramp (CFET-4) and constant-field propagation.

Times are in ms and fields/energies in rad/ms.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from . import kernels
from .spin_system import EigenDecomposition, build_hamiltonian, HamiltonianSpec, DimensionError
from .trap_chain import CouplingMatrix
from .units import to_angular

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
GAUSS_NODES = (0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0)
# CFET-4 coefficients; row k is the k-th exponential applied (rightmost factor first).
CFET4_COEFFS = (
    ((3.0 + 2.0 * SQRT3) / 12.0, (3.0 - 2.0 * SQRT3) / 12.0),
    ((3.0 - 2.0 * SQRT3) / 12.0, (3.0 + 2.0 * SQRT3) / 12.0),
)
# dense Pade below this Hilbert-space dimension, Lanczos above
PADE_MAX_DIM = 64


@dataclass(frozen=True)
class RampSchedule:
    """B(t) = B0 exp(-(t - t_init)/tau), stopped when it reaches ``target``."""
    B0: float
    tau: float
    target: float
    t_init: float = 0.0

    def __post_init__(self):
        if not self.B0 > self.target > 0:
            raise ValueError(f"need B0 > target > 0, got B0={self.B0}, target={self.target}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @classmethod
    def standard(cls, j0_angular: float, target_ratio: float, *,
                 b0_ratio: float = 10.0, tau_j0: float = 0.85) -> "RampSchedule":
        """B0 = 10 J0, tau = 0.85 / J0 with J0 in rad/ms."""
        return cls(b0_ratio * j0_angular, tau_j0 / j0_angular, target_ratio * j0_angular)

    @property
    def t0(self) -> float:
        return self.t_init + self.tau * math.log(self.B0 / self.target)

    def field_at(self, t):
        return self.B0 * np.exp(-(np.asarray(t) - self.t_init) / self.tau)


@dataclass(frozen=True)
class CfetConfig:
    dt: float  # ms
    refine_tol: float = 1e-9
    max_halvings: int = 6
    adaptive: bool = True
    expm_tol: float = 1e-12

    @classmethod
    def default_for(cls, j0_angular: float, **kw) -> "CfetConfig":
        return cls(dt=1e-3 * 2.0 * math.pi / j0_angular, **kw)


class KrylovError(RuntimeError):
    pass


def expm_multiply_hermitian(matvec: Callable[[np.ndarray], np.ndarray], v: np.ndarray,
                            dt: float, *, tol: float = 1e-12, m_max: int = 40) -> np.ndarray:
    """exp(-1j * dt * H) v by Lanczos with full reorthogonalisation.

    The step is split when the a-posteriori error estimate
    beta_m |[exp(-i dt T_m)]_{m,0}| exceeds ``tol * ||v||``.
    """
    beta0 = np.linalg.norm(v)
    if beta0 == 0.0 or dt == 0.0:
        return v.copy()
    remaining = dt
    w = v.astype(complex, copy=True)
    h_sub = dt
    while remaining > 0:
        h_sub = min(h_sub, remaining)
        w_next, err, h_used = _lanczos_step(matvec, w, h_sub, tol, m_max)
        if w_next is None:
            h_sub = h_used
            continue
        w = w_next
        remaining -= h_used
        if remaining <= 1e-15 * dt:
            break
    return w


def _lanczos_step(matvec, v, h, tol, m_max):
    beta = np.linalg.norm(v)
    dim = v.shape[0]
    m_cap = min(m_max, dim)
    V = np.empty((m_cap + 1, dim), dtype=complex)
    alpha = np.zeros(m_cap)
    betas = np.zeros(m_cap)
    V[0] = v / beta
    for j in range(m_cap):
        w = matvec(V[j])
        alpha[j] = np.real(np.vdot(V[j], w))
        w = w - alpha[j] * V[j]
        if j > 0:
            w = w - betas[j - 1] * V[j - 1]
        # full reorthogonalisation, twice is enough
        for _ in range(2):
            w = w - V[: j + 1].T @ (V[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        m = j + 1
        T = np.diag(alpha[:m]) + np.diag(betas[: m - 1], 1) + np.diag(betas[: m - 1], -1)
        ev, U = np.linalg.eigh(T)
        if b < 1e-13 * max(1.0, abs(alpha[:m]).max()):
            # invariant subspace: exact
            coef = U @ (np.exp(-1j * h * ev) * U[0].conj())
            return beta * (coef @ V[:m]), 0.0, h
        coef = U @ (np.exp(-1j * h * ev) * U[0].conj())
        err = b * abs(coef[-1])
        if err < tol:
            return beta * (coef @ V[:m]), err, h
        betas[j] = b
        V[j + 1] = w / b
    # not converged within m_cap: shrink the step
    return None, err, 0.5 * h


def _tfim_matvec(J_ang: np.ndarray, field: float):
    J_ang = np.ascontiguousarray(J_ang, dtype=float)
    def mv(psi):
        psi = np.ascontiguousarray(psi, dtype=complex)
        out = np.empty_like(psi)
        return kernels.apply_tfim(J_ang, field, psi, out)
    return mv


def _apply_exp(J_ang, field, psi, dt, tol):
    """exp(-1j dt H(J_ang, field)) psi, dense Pade for small systems."""
    dim = psi.shape[0]
    if dim <= PADE_MAX_DIM:
        # CouplingMatrix is in kHz, so rebuild one matching J_ang
        cm = CouplingMatrix(J_ang / to_angular(1.0), 0.0)
        h = build_hamiltonian(HamiltonianSpec(cm, field))
        return scipy.linalg.expm(-1j * dt * h) @ psi
    return expm_multiply_hermitian(_tfim_matvec(J_ang, field), psi, dt, tol=tol)


def cfet4_step(field_at: Callable[[float], float], couplings: CouplingMatrix, t: float,
               dt: float, psi: np.ndarray, *, tol: float = 1e-12) -> np.ndarray:
    """One fourth-order commutator-free step from t to t + dt.

    Each factor is exp(-i dt [a_k1 H(t + c1 dt) + a_k2 H(t + c2 dt)]). The Ising
    part enters with a_k1 + a_k2 = 1/2 and the field with the weighted sum.
    """
    J_ang = to_angular(couplings.J)
    b1 = float(field_at(t + GAUSS_NODES[0] * dt))
    b2 = float(field_at(t + GAUSS_NODES[1] * dt))
    for a1, a2 in CFET4_COEFFS:
        psi = _apply_exp((a1 + a2) * J_ang, a1 * b1 + a2 * b2, psi, dt, tol)
    return psi


def _run_ramp(schedule, couplings, psi, n_steps, tol):
    dt = (schedule.t0 - schedule.t_init) / n_steps
    t = schedule.t_init
    for k in range(n_steps):
        psi = cfet4_step(schedule.field_at, couplings, t, dt, psi, tol=tol)
        t = schedule.t_init + (k + 1) * dt
    return psi


def evolve_ramp(schedule: RampSchedule, couplings: CouplingMatrix, psi_init: np.ndarray,
                cfg: CfetConfig, *, return_steps: bool = False):
    """Propagate ``psi_init`` from t_init to t0 through the field ramp.

    With ``cfg.adaptive`` the step is halved until two successive
    refinements agree to ``cfg.refine_tol`` in the 2-norm.
    """
    duration = schedule.t0 - schedule.t_init
    n_steps = max(1, math.ceil(duration / cfg.dt - 1e-9))
    psi = _run_ramp(schedule, couplings, psi_init, n_steps, cfg.expm_tol)
    if cfg.adaptive:
        for _ in range(cfg.max_halvings):
            finer = _run_ramp(schedule, couplings, psi_init, 2 * n_steps, cfg.expm_tol)
            diff = np.linalg.norm(finer - psi)
            n_steps *= 2
            psi = finer
            log.debug("ramp refinement: %d steps, change %.3e", n_steps, diff)
            if diff < cfg.refine_tol:
                break
        else:
            log.warning("ramp refinement stopped at %d steps (last change %.3e)", n_steps, diff)
    if return_steps:
        return psi, n_steps
    return psi


def evolve_constant(eig: EigenDecomposition, psi: np.ndarray, dt) -> np.ndarray:
    """exp(-i H dt) psi through the eigenbasis; ``dt`` may be an array of times.

    For an array of times the result has one column per time.
    """
    psi = np.asarray(psi)
    if psi.shape[0] != eig.dim:
        raise DimensionError(f"state length {psi.shape[0]} does not match eigenbasis {eig.dim}")
    c = eig.overlaps(psi)
    dt = np.asarray(dt, dtype=float)
    if dt.ndim == 0:
        return eig.vectors @ (np.exp(-1j * eig.energies * dt) * c)
    return eig.vectors @ (np.exp(-1j * np.outer(eig.energies, dt)) * c[:, None])
