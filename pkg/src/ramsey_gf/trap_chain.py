"""Ion chain equilibrium, transverse phonon modes and Ising couplings.

Lengths are in the standard Coulomb unit
``l = (e^2 / (4 pi eps0 M omega_ax^2))^(1/3)``; frequencies are
conventional kHz.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

#: Lamb-Dicke parameter quoted for the 171Yb+ setup; fixes omega_COM = nu_R / eta^2.
REFERENCE_LAMB_DICKE = 0.0621
#: Axial centre-of-mass window over which alpha is tuned.
AXIAL_RANGE_KHZ = (620.0, 950.0)

J0_CONVENTIONS = ("nn-mean", "edge-sum")


class ChainConvergenceError(RuntimeError):
    """Equilibrium Newton iteration hit its cap."""


class ZigzagInstabilityError(ValueError):
    pass


class ResonantDetuningError(ValueError):
    pass


class AlphaRangeError(ValueError):
    pass


@dataclass(frozen=True)
class TrapParams:
    ion_count: int = 10
    rabi_frequency: float = 600.0
    recoil_frequency: float = 18.5
    axial_com_frequency: float = 750.0
    transverse_com_frequency: float = 18.5 / REFERENCE_LAMB_DICKE**2
    detuning_offset_factor: float = 3.0

    def __post_init__(self):
        if self.ion_count < 1:
            raise ValueError(f"ion_count must be >= 1, got {self.ion_count}")
        for name in ("rabi_frequency", "recoil_frequency", "axial_com_frequency",
                     "transverse_com_frequency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.transverse_com_frequency <= self.axial_com_frequency:
            raise ValueError("transverse COM frequency must exceed the axial one "
                             "for a linear chain")
        if self.lamb_dicke >= 1:
            raise ValueError(f"Lamb-Dicke parameter {self.lamb_dicke:.3g} >= 1")

    @property
    def lamb_dicke(self) -> float:
        return float(np.sqrt(self.recoil_frequency / self.transverse_com_frequency))

    @property
    def detuning(self) -> float:
        """Beat-note detuning mu = omega_COM + k * eta * Omega (kHz)."""
        return (self.transverse_com_frequency
                + self.detuning_offset_factor * self.lamb_dicke * self.rabi_frequency)

    def with_axial(self, axial_khz: float) -> "TrapParams":
        return replace(self, axial_com_frequency=float(axial_khz))


@dataclass(frozen=True)
class IonChain:
    positions: np.ndarray
    length_unit_note: str = "Coulomb length (e^2/(4 pi eps0 M omega_ax^2))^(1/3)"

    @property
    def ion_count(self) -> int:
        return len(self.positions)

    def distances(self) -> np.ndarray:
        return np.abs(self.positions[:, None] - self.positions[None, :])


@dataclass(frozen=True)
class PhononModes:
    frequencies: np.ndarray  # kHz, descending
    vectors: np.ndarray  # vectors[i, m] = b_im


@dataclass(frozen=True)
class CouplingMatrix:
    J: np.ndarray  # kHz, symmetric, zero diagonal
    J0: float  # kHz
    sign: int = 1  # +1 ferromagnetic, -1 antiferromagnetic
    j0_convention: str = "nn-mean"

    @property
    def ion_count(self) -> int:
        return self.J.shape[0]


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    rms_log_residual: float


def _forces(u):
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, 1.0)
    coul = np.sign(d) / d**2
    np.fill_diagonal(coul, 0.0)
    return u - coul.sum(axis=1)


def _force_jacobian(u):
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, 1.0)
    k = 2.0 / d**3
    np.fill_diagonal(k, 0.0)
    return np.diag(1.0 + k.sum(axis=1)) - k


def solve_equilibrium(trap: TrapParams, *, damping: float = 0.5,
                      max_iter: int = 500, tol: float = 1e-12) -> IonChain:
    """Equilibrium positions from force balance by damped Newton.

    Steps are halved (by ``damping``) until the residual decreases; the
    initial guess is uniformly spaced over the approximate chain length.
    """
    n = trap.ion_count
    if n == 1:
        return IonChain(np.zeros(1))
    half = 0.5 * 2.0 * n**0.56  # rough chain half-length, only needs to be ordered
    u = np.linspace(-half, half, n)
    res = np.max(np.abs(_forces(u)))
    for _ in range(max_iter):
        if res < tol:
            break
        step = np.linalg.solve(_force_jacobian(u), -_forces(u))
        lam = 1.0
        while True:
            trial = u + lam * step
            ordered = np.all(np.diff(trial) > 0)
            if ordered:
                trial_res = np.max(np.abs(_forces(trial)))
                if trial_res < res or lam < 1e-6:
                    break
            lam *= damping
        u, res = trial, trial_res
    if res >= tol:
        raise ChainConvergenceError(
            f"equilibrium not converged after {max_iter} iterations (residual {res:.3e})")
    # exact mirror symmetry; the solution already satisfies it to round-off
    u = 0.5 * (u - u[::-1])
    return IonChain(u)


def transverse_modes(chain: IonChain, trap: TrapParams) -> PhononModes:
    """Transverse normal modes of the chain, highest (COM) mode first."""
    u = chain.positions
    n = len(u)
    ratio2 = (trap.transverse_com_frequency / trap.axial_com_frequency) ** 2
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    c = 1.0 / d**3
    hess = c + np.diag(ratio2 - c.sum(axis=1))
    evals, evecs = np.linalg.eigh(hess)
    if evals[0] <= 0:
        raise ZigzagInstabilityError(
            f"zigzag instability: transverse Hessian eigenvalue {evals[0]:.4g} <= 0 "
            f"for omega_COM/omega_ax = {np.sqrt(ratio2):.4f} with N={n}")
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    for m in range(n):
        pivot = np.argmax(np.abs(evecs[:, m]) > 1e-8)
        if evecs[pivot, m] < 0:
            evecs[:, m] *= -1
    freqs = trap.axial_com_frequency * np.sqrt(evals)
    return PhononModes(freqs, evecs)


def j0_scale(J: np.ndarray, convention: str = "nn-mean") -> float:
    """Energy unit J0 for B/J0 ratios.

    ``nn-mean``: mean nearest-neighbour |J_{i,i+1}| (default).
    ``edge-sum``: total coupling sum_j |J_0j| felt by the end ion.
    """
    if convention == "nn-mean":
        return float(np.mean(np.abs(np.diag(J, 1)))) if J.shape[0] > 1 else 0.0
    if convention == "edge-sum":
        return float(np.sum(np.abs(J[0])))
    raise ValueError(f"unknown J0 convention {convention!r}; expected one of {J0_CONVENTIONS}")


def coupling_matrix(modes: PhononModes, trap: TrapParams, *, sign: int = 1,
                    j0_convention: str = "nn-mean") -> CouplingMatrix:
    """Static Ising couplings from the transverse modes (kHz).

    J_ij = Omega^2 nu_R sum_m b_im b_jm / (mu^2 - omega_m^2); the squared Rabi
    frequency keeps J in kHz.
    """
    mu = trap.detuning
    if mu <= modes.frequencies.max():
        raise ResonantDetuningError(
            f"resonant detuning: mu = {mu:.3f} kHz is not above the highest mode "
            f"{modes.frequencies.max():.3f} kHz")
    b = modes.vectors
    weights = 1.0 / (mu**2 - modes.frequencies**2)
    J = trap.rabi_frequency**2 * trap.recoil_frequency * (b * weights) @ b.T
    J = 0.5 * (J + J.T)
    np.fill_diagonal(J, 0.0)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 (ferromagnetic) or -1 (antiferromagnetic)")
    J = sign * J
    return CouplingMatrix(J, j0_scale(J, j0_convention), sign, j0_convention)


def fit_alpha(J: CouplingMatrix | np.ndarray, chain: IonChain) -> PowerLawFit:
    """Least-squares fit of log|J_ij| against log|R_i - R_j| over i < j."""
    Jm = J.J if isinstance(J, CouplingMatrix) else np.asarray(J)
    n = Jm.shape[0]
    if n < 3:
        raise ValueError("power-law fit needs N >= 3")
    iu = np.triu_indices(n, 1)
    x = np.log(chain.distances()[iu])
    y = np.log(np.abs(Jm[iu]))
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([slope, intercept])
    return PowerLawFit(float(-slope), float(np.exp(intercept)),
                       float(np.sqrt(np.mean(resid**2))))


@dataclass
class ChainSolution:
    """Everything derived from one trap setting."""
    trap: TrapParams
    chain: IonChain
    modes: PhononModes
    couplings: CouplingMatrix
    fit: PowerLawFit = field(default=None)


def solve_chain(trap: TrapParams, *, sign: int = 1,
                j0_convention: str = "nn-mean") -> ChainSolution:
    chain = solve_equilibrium(trap)
    modes = transverse_modes(chain, trap)
    cm = coupling_matrix(modes, trap, sign=sign, j0_convention=j0_convention)
    fit = fit_alpha(cm, chain) if trap.ion_count >= 3 else None
    return ChainSolution(trap, chain, modes, cm, fit)


def tune_axial(target_alpha: float, trap: TrapParams, *, tol: float = 1e-3,
               axial_range: tuple[float, float] = AXIAL_RANGE_KHZ) -> TrapParams:
    """Bisect the axial COM frequency until the fitted alpha hits the target.

    alpha falls as omega_ax grows, so the bracket is [alpha(hi), alpha(lo)].
    """
    chain = solve_equilibrium(trap)  # dimensionless positions do not depend on omega_ax

    def alpha_at(w):
        t = trap.with_axial(w)
        return fit_alpha(coupling_matrix(transverse_modes(chain, t), t), chain).exponent

    lo, hi = axial_range
    a_lo, a_hi = alpha_at(lo), alpha_at(hi)
    if not (min(a_lo, a_hi) <= target_alpha <= max(a_lo, a_hi)):
        raise AlphaRangeError(
            f"alpha = {target_alpha} unreachable: omega_ax in [{lo}, {hi}] kHz "
            f"gives alpha in [{min(a_lo, a_hi):.3f}, {max(a_lo, a_hi):.3f}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        a_mid = alpha_at(mid)
        if abs(a_mid - target_alpha) < tol:
            break
        if (a_mid > target_alpha) == (a_lo > a_hi):
            lo = mid
        else:
            hi = mid
    log.debug("tuned omega_ax = %.4f kHz for alpha %.4f (got %.5f)", mid, target_alpha, a_mid)
    return trap.with_axial(mid)
