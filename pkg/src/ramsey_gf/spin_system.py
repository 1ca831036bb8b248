"""Spin-1/2 Hilbert space, Pauli operators and the transverse-field Ising model.

Basis convention: bit ``j`` of a basis index is the sigma^z eigenvalue of
site ``j`` (0 -> +1, 1 -> -1); site 0 is the least significant bit.
States are complex vectors of length 2**N, operators dense 2**N x 2**N
arrays. All energies here are angular (rad/ms).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .trap_chain import CouplingMatrix
from .units import to_angular

MAX_DENSE_SITES = 14
_AXES = {"x": 0, "y": 1, "z": 2}

# W with W Z W^dag = Y and W X W^dag = X; the TFIM is real symmetric in this frame.
_W = np.array([[1.0, 1.0j], [1.0j, 1.0]]) / np.sqrt(2.0)


class DimensionError(ValueError):
    pass


def n_sites(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim != 1 << n:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def _check_site(site, n):
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for N={n}")


def pauli(axis: str, site: int, n: int) -> np.ndarray:
    """Dense sigma^(axis) acting on ``site`` of an ``n``-site register."""
    _check_site(site, n)
    dim = 1 << n
    idx = np.arange(dim)
    bit = (idx >> site) & 1
    op = np.zeros((dim, dim), dtype=complex)
    if axis == "x":
        op[idx ^ (1 << site), idx] = 1.0
    elif axis == "y":
        # Y|0> = i|1>, Y|1> = -i|0>
        op[idx ^ (1 << site), idx] = np.where(bit, -1j, 1j)
    elif axis == "z":
        op[idx, idx] = np.where(bit, -1.0, 1.0)
    else:
        raise ValueError(f"axis must be 'x', 'y' or 'z', got {axis!r}")
    return op


def apply_pauli(axis: str, site: int, psi: np.ndarray) -> np.ndarray:
    """sigma^(axis)_site |psi> without forming the operator."""
    psi = np.ascontiguousarray(psi, dtype=complex)
    _check_site(site, n_sites(psi.shape[0]))
    out = np.empty_like(psi)
    kernels.apply_pauli(_AXES[axis], site, psi, out)
    return out


def apply_pauli_string(ops, psi: np.ndarray) -> np.ndarray:
    """Apply a product like ``[("x", 0), ("y", 3)]``; the rightmost factor acts first."""
    for axis, site in reversed(list(ops)):
        psi = apply_pauli(axis, site, psi)
    return psi


@dataclass(frozen=True)
class HamiltonianSpec:
    couplings: CouplingMatrix
    field: float  # B^(y), rad/ms

    @property
    def ion_count(self) -> int:
        return self.couplings.ion_count

    def angular_couplings(self) -> np.ndarray:
        return np.ascontiguousarray(to_angular(self.couplings.J), dtype=float)


def apply_hamiltonian(spec: HamiltonianSpec, psi: np.ndarray) -> np.ndarray:
    psi = np.ascontiguousarray(psi, dtype=complex)
    if psi.shape[0] != 1 << spec.ion_count:
        raise DimensionError(f"state length {psi.shape[0]} does not match {spec.ion_count} sites")
    out = np.empty_like(psi)
    return kernels.apply_tfim(spec.angular_couplings(), float(spec.field), psi, out)


def _ising_part(J: np.ndarray, n: int) -> np.ndarray:
    """-sum_{i<j} J_ij X_i X_j as a dense real matrix (same in both frames)."""
    dim = 1 << n
    idx = np.arange(dim)
    h = np.zeros((dim, dim))
    for i in range(n):
        for j in range(i + 1, n):
            if J[i, j] != 0.0:
                h[idx ^ ((1 << i) | (1 << j)), idx] -= J[i, j]
    return h


def build_hamiltonian(spec: HamiltonianSpec) -> np.ndarray:
    """H = -sum_{i<j} J_ij X_i X_j - B sum_i Y_i (dense, complex, z basis)."""
    n = spec.ion_count
    if spec.couplings.J.shape != (n, n):
        raise DimensionError("coupling matrix is not square")
    _cap(n)
    h = _ising_part(spec.angular_couplings(), n).astype(complex)
    if spec.field != 0.0:
        for k in range(n):
            h -= spec.field * pauli("y", k, n)
    return h


def _real_frame_hamiltonian(spec: HamiltonianSpec) -> np.ndarray:
    """W^dag H W for W = prod_k W_k: Y -> Z, so the matrix is real symmetric."""
    n = spec.ion_count
    h = _ising_part(spec.angular_couplings(), n)
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
    h[np.diag_indices_from(h)] -= spec.field * (n - 2 * bits.sum(axis=1))
    return h


def apply_local(u2: np.ndarray, site: int, a: np.ndarray) -> np.ndarray:
    """Apply a 2x2 single-site matrix to a state, or to every column of a matrix."""
    a = np.asarray(a, dtype=complex)
    n = n_sites(a.shape[0])
    _check_site(site, n)
    cols = a.shape[1:]
    t = a.reshape((2,) * n + cols)
    ax = n - 1 - site  # tensor axis 0 is the most significant bit
    t = np.moveaxis(np.tensordot(u2, t, axes=([1], [ax])), 0, ax)
    return t.reshape(a.shape)


def rotate_from_real_frame(a: np.ndarray, n: int) -> np.ndarray:
    """Apply W = prod_k W_k to a vector or to every column of a matrix."""
    for k in range(n):
        a = apply_local(_W, k, a)
    return a


def parity_operator(n: int) -> np.ndarray:
    """Spin-reflection parity P = prod_j Y_j (Hermitian, unitary, P^2 = 1)."""
    dim = 1 << n
    idx = np.arange(dim)
    pop = np.array([bin(s).count("1") for s in range(dim)])
    # prod_j Y_j |s> = prod_j [i (-1)^{s_j}] |~s>
    phase = (1j**n) * (-1.0) ** pop
    p = np.zeros((dim, dim), dtype=complex)
    p[idx ^ (dim - 1), idx] = phase
    return p


def apply_parity(psi: np.ndarray) -> np.ndarray:
    n = n_sites(psi.shape[0])
    return apply_pauli_string([("y", k) for k in range(n)], psi)


@dataclass
class EigenDecomposition:
    energies: np.ndarray  # ascending, rad/ms
    vectors: np.ndarray  # columns, z basis
    parity: np.ndarray  # +-1 per eigenvector
    norm: float = 0.0  # spectral radius used for degeneracy thresholds

    @property
    def dim(self) -> int:
        return len(self.energies)

    def overlaps(self, psi: np.ndarray) -> np.ndarray:
        """C_n = <n|psi>."""
        return self.vectors.conj().T @ psi

    def matrix_elements(self, op_apply) -> np.ndarray:
        """<m|O|n> for an operator given as a state -> state callable."""
        ov = np.column_stack([op_apply(self.vectors[:, k]) for k in range(self.dim)])
        return self.vectors.conj().T @ ov

    def x_elements(self, site: int) -> np.ndarray:
        """<m|X_site|n>; X only flips a bit, so this is a row permutation."""
        n = n_sites(self.dim)
        _check_site(site, n)
        idx = np.arange(self.dim) ^ (1 << site)
        return self.vectors.conj().T @ self.vectors[idx]


def _cap(n):
    if n > MAX_DENSE_SITES:
        raise DimensionError(f"dense diagonalisation capped at N={MAX_DENSE_SITES}, got {n}")


def _degenerate_blocks(energies, tol):
    start = 0
    for k in range(1, len(energies) + 1):
        if k == len(energies) or energies[k] - energies[k - 1] > tol:
            yield start, k
            start = k


def _rotate_to_parity(energies, vectors, parity_apply, tol):
    """Diagonalise P inside each degenerate block; returns vectors and labels."""
    labels = np.empty(len(energies))
    pv = parity_apply(vectors)
    for a, b in _degenerate_blocks(energies, tol):
        if b - a == 1:
            labels[a] = np.real(np.vdot(vectors[:, a], pv[:, a]))
            continue
        block = vectors[:, a:b].conj().T @ pv[:, a:b]
        block = 0.5 * (block + block.conj().T)
        pe, u = np.linalg.eigh(block)
        vectors[:, a:b] = vectors[:, a:b] @ u
        labels[a:b] = pe
    return vectors, np.sign(np.round(labels, 6))


def diagonalize(h: np.ndarray, *, degeneracy_tol: float = 1e-9) -> EigenDecomposition:
    """Dense Hermitian eigendecomposition with parity-definite eigenvectors.

    Blocks whose level spacing is below ``degeneracy_tol * ||H||`` are rotated
    so each eigenvector is a spin-reflection parity eigenstate.
    """
    h = np.asarray(h)
    if not np.allclose(h, h.conj().T, atol=1e-12 * max(1.0, np.abs(h).max())):
        raise ValueError("operator is not Hermitian")
    n = n_sites(h.shape[0])
    _cap(n)
    energies, vectors = np.linalg.eigh(h)
    scale = max(np.abs(energies).max(), 1e-300)
    p = parity_operator(n)
    vectors, labels = _rotate_to_parity(energies, vectors, lambda v: p @ v,
                                        degeneracy_tol * scale)
    return EigenDecomposition(energies, vectors, labels, scale)


def diagonalize_tfim(spec: HamiltonianSpec, *, degeneracy_tol: float = 1e-9) -> EigenDecomposition:
    """Eigendecomposition of the TFIM via its real-symmetric frame.

    In the frame rotated by W the parity is prod_j Z_j = (-1)^popcount, so
    the degenerate-block rotation is a real problem too.
    """
    n = spec.ion_count
    _cap(n)
    hr = _real_frame_hamiltonian(spec)
    energies, vr = np.linalg.eigh(hr)
    scale = max(np.abs(energies).max(), 1e-300)
    pop = np.array([bin(s).count("1") for s in range(1 << n)])
    pdiag = (-1.0) ** pop
    vr, labels = _rotate_to_parity(energies, vr, lambda v: pdiag[:, None] * v,
                                   degeneracy_tol * scale)
    return EigenDecomposition(energies, rotate_from_real_frame(vr, n), labels, scale)


def initial_state(n: int) -> np.ndarray:
    """Product state with every spin along +y."""
    single = np.array([1.0, 1.0j]) / np.sqrt(2.0)
    psi = np.ones(1, dtype=complex)
    for _ in range(n):
        psi = np.kron(single, psi)
    return psi


def expectation(psi: np.ndarray, op) -> complex:
    """<psi|O|psi> for a dense operator or a state -> state callable."""
    psi = np.asarray(psi)
    if callable(op):
        return complex(np.vdot(psi, op(psi)))
    if op.shape != (psi.shape[0], psi.shape[0]):
        raise DimensionError(f"operator shape {op.shape} does not match state length {psi.shape[0]}")
    return complex(np.vdot(psi, op @ psi))


def coupled_gap(eig: EigenDecomposition) -> float:
    """E(first excited state with the ground state's parity) - E0."""
    same = np.flatnonzero(eig.parity[1:] == eig.parity[0])
    if same.size == 0:
        return float("nan")
    return float(eig.energies[same[0] + 1] - eig.energies[0])


def gap_sweep(couplings: CouplingMatrix, field_ratios) -> np.ndarray:
    """Coupled gap (in units of angular J0) for each B/J0 in ``field_ratios``."""
    j0 = to_angular(couplings.J0)
    gaps = []
    for r in field_ratios:
        eig = diagonalize_tfim(HamiltonianSpec(couplings, float(r) * j0))
        gaps.append(coupled_gap(eig) / j0)
    return np.asarray(gaps)
