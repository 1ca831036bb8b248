"""Sparse spectral recovery by basis pursuit, plus Lehmann reference lines.

Samples g_m = G(m*dt), m < M, are modelled as the first M rows of a scaled
inverse DFT of an N_step-bin spectrum x, g = F^-1 x, with
F^-1[m, n] = exp(-i w_n t_m) / N_step. A random orthogonal A mixes the rows:
the constraint is A F^-1 x = A g. The L1 norm counts complex moduli.

A spectral line c*exp(-i W t) in G therefore shows up as x ~ N_step*c at the
bin nearest W (modulo the sampling frequency 2*pi/dt).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .kernels import soft_threshold
from .spin_system import EigenDecomposition

log = logging.getLogger(__name__)

EPS_FEAS = 1e-8
TOL = 1e-9
MAX_ITER = 50_000


class CsConvergenceError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class CsProblem:
    M: int
    N_step: int
    dt: float  # ms
    A: np.ndarray
    seed: int | None

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.M)

    @property
    def omega(self) -> np.ndarray:
        """w_n = 2 pi n / (N_step dt), n = 0..N_step-1."""
        return 2.0 * np.pi * np.arange(self.N_step) / (self.N_step * self.dt)

    @property
    def bin_width(self) -> float:
        return 2.0 * np.pi / (self.N_step * self.dt)

    @property
    def period(self) -> float:
        """Sampling frequency; grid frequencies are defined modulo this."""
        return 2.0 * np.pi / self.dt

    def signed_omega(self) -> np.ndarray:
        w = self.omega.copy()
        w[np.arange(self.N_step) >= (self.N_step + 1) // 2] -= self.period
        return w

    # sensing operator Phi = A F^-1 and its adjoint, both through the FFT
    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.A @ (np.fft.fft(x)[: self.M] / self.N_step)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        w = np.zeros(self.N_step, dtype=complex)
        w[: self.M] = self.A.T @ y
        return np.fft.ifft(w)

    def dense(self) -> np.ndarray:
        m = np.arange(self.M)[:, None]
        n = np.arange(self.N_step)[None, :]
        return self.A @ (np.exp(-2j * np.pi * m * n / self.N_step) / self.N_step)


def random_orthogonal(M: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((M, M)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)  # unique (Haar) representative


def build_problem(M: int = 64, N_step: int = 1024, T: float = 6.0, seed: int | None = 0,
                  identity: bool = False) -> CsProblem:
    if M > N_step:
        raise ValueError(f"M={M} exceeds N_step={N_step}")
    if M < 1 or T <= 0:
        raise ValueError("need M >= 1 and T > 0")
    A = np.eye(M) if identity else random_orthogonal(M, np.random.default_rng(seed))
    return CsProblem(M, N_step, T / M, A, seed)


@dataclass
class Peak:
    frequency: float  # rad/ms, signed
    magnitude: float
    bins: tuple
    unresolved: bool = False


@dataclass
class Spectrum:
    amplitudes: np.ndarray
    omega: np.ndarray  # signed grid frequencies
    bin_width: float
    period: float
    diagnostics: dict = field(default_factory=dict)
    peaks: list = field(default_factory=list)


def _admm(project, range_project, n, scale, tol, max_iter, dtype=complex, relax=1.8):
    """Over-relaxed ADMM for min ||x||_1 subject to x in an affine set.

    ``project`` maps onto the affine set; ``range_project`` onto the row space
    of the operator, used to turn the scaled multiplier into a dual-feasible
    point. Stops when both ADMM residuals or the relative duality gap fall
    below ``tol``. Returns (x, z, iterations, converged, gap).
    """
    rho = 1.0 / max(scale, 1e-300)
    z = np.zeros(n, dtype=dtype)
    u = np.zeros(n, dtype=dtype)
    buf = np.empty(n, dtype=complex)
    x = project(z)
    gap = np.inf
    for it in range(1, max_iter + 1):
        x = project(z - u)
        z_old = z
        xh = relax * x + (1.0 - relax) * z_old
        soft_threshold(np.ascontiguousarray(xh + u, dtype=complex), 1.0 / rho, buf)
        z = buf.real.copy() if dtype is float else buf.copy()
        u = u + xh - z
        r = np.linalg.norm(x - z)
        s = rho * np.linalg.norm(z - z_old)
        nrm = max(np.linalg.norm(x), 1e-300)
        if r <= tol * nrm and s <= tol * max(rho * np.linalg.norm(u), 1e-300):
            return x, z, it, True, _gap(x, rho * u, range_project)
        if it % 50 == 0 or it == max_iter:
            gap = _gap(x, rho * u, range_project)
            if gap <= tol:
                return x, z, it, True, gap
    return x, z, max_iter, False, gap


def _gap(x, y, range_project):
    """Relative duality gap of feasible x against the multiplier y in d||z||_1."""
    l1 = float(np.abs(x).sum())
    if l1 == 0.0:
        return 0.0
    yr = range_project(y)
    yr = yr / max(1.0, float(np.abs(yr).max()))
    return (l1 - float(np.vdot(yr, x).real)) / l1


def _polish(apply_cols, b, z, thr_rel=1e-6):
    """Least squares on the support of the sparse iterate."""
    mag = np.abs(z)
    if mag.max(initial=0.0) == 0.0:
        return None
    S = np.flatnonzero(mag > thr_rel * mag.max())
    PhiS = apply_cols(S)
    if len(S) > PhiS.shape[0]:
        return None
    xs = np.linalg.lstsq(PhiS, b, rcond=None)[0]
    out = np.zeros_like(z)
    out[S] = xs
    return out


def _choose(candidates, residual, l1):
    ok = [c for c in candidates if c is not None and residual(c) < EPS_FEAS]
    return min(ok, key=l1) if ok else None


def basis_pursuit(prob: CsProblem, samples: np.ndarray, *, tol: float = TOL,
                  max_iter: int = MAX_ITER) -> Spectrum:
    """min sum|x_n| subject to A F^-1 x = A g."""
    g = np.asarray(samples)
    if g.shape != (prob.M,) or not np.all(np.isfinite(g)):
        raise ValueError(f"need {prob.M} finite samples")
    b = prob.A @ g.astype(complex)
    N = prob.N_step
    bnorm = max(np.linalg.norm(b), 1e-300)

    def project(v):
        # Phi Phi^dagger = I / N_step, so the affine projection is explicit
        return v - N * prob.adjoint(prob.forward(v) - b)

    def residual(x):
        return np.linalg.norm(prob.forward(x) - b) / bnorm

    if np.linalg.norm(b) == 0.0:
        x = np.zeros(N, dtype=complex)
        diag = {"iterations": 0, "residual": 0.0, "l1": 0.0, "converged": True, "gap": 0.0,
                "polished": False}
        return Spectrum(x, prob.signed_omega(), prob.bin_width, prob.period, diag)

    x_ls = project(np.zeros(N, dtype=complex))
    range_project = lambda y: N * prob.adjoint(prob.forward(y))
    x, z, iters, conv, gap = _admm(project, range_project, N, np.abs(x_ls).max(), tol, max_iter)
    dense_cols = lambda S: prob.A @ (np.exp(-2j * np.pi * np.outer(np.arange(prob.M), S) / N) / N)
    pol = _polish(dense_cols, b, z)
    l1 = lambda v: float(np.abs(v).sum())
    best = _choose([pol, x], residual, l1)
    if best is None:
        raise CsConvergenceError("basis pursuit lost feasibility", residual(x))
    if not conv:
        log.warning("basis pursuit stopped at the iteration cap with relative gap %.2e", gap)
    diag = {"iterations": iters, "residual": residual(best), "l1": l1(best), "converged": conv,
            "gap": float(gap), "polished": best is pol}
    log.debug("basis pursuit: %s", diag)
    return Spectrum(best, prob.signed_omega(), prob.bin_width, prob.period, diag)


def basis_pursuit_dense(Phi: np.ndarray, b: np.ndarray, *, tol: float = TOL,
                        max_iter: int = MAX_ITER) -> np.ndarray:
    """Same solver for an explicit matrix with full row rank (real or complex)."""
    Phi = np.asarray(Phi)
    real = np.isrealobj(Phi) and np.isrealobj(b)
    dtype = float if real else complex
    pinv = np.linalg.pinv(Phi)
    b = np.asarray(b, dtype=dtype)
    bnorm = max(np.linalg.norm(b), 1e-300)
    project = lambda v: v - pinv @ (Phi @ v - b)
    residual = lambda x: np.linalg.norm(Phi @ x - b) / bnorm
    x0 = project(np.zeros(Phi.shape[1], dtype=dtype))
    if np.linalg.norm(b) == 0.0:
        return np.zeros(Phi.shape[1], dtype=dtype)
    range_project = lambda y: pinv @ (Phi @ y)
    x, z, iters, conv, gap = _admm(project, range_project, Phi.shape[1], np.abs(x0).max(), tol,
                                   max_iter, dtype)
    pol = _polish(lambda S: Phi[:, S], b, z)
    best = _choose([pol, x], residual, lambda v: float(np.abs(v).sum()))
    if best is None:
        raise CsConvergenceError("dense basis pursuit failed", residual(x))
    return best


def extract_peaks(s: Spectrum, threshold_fraction: float = 0.05) -> list[Peak]:
    """Local maxima of |x| above a fraction of the maximum, merged within one bin."""
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    mag = np.abs(s.amplitudes)
    n = len(mag)
    top = mag.max(initial=0.0)
    if top == 0.0:
        return []
    left, right = np.roll(mag, 1), np.roll(mag, -1)
    cand = np.flatnonzero((mag >= left) & (mag >= right) & (mag > threshold_fraction * top))
    # group maxima at most one empty bin apart (circular grid)
    groups: list[list[int]] = []
    for k in cand:
        if groups and k - groups[-1][-1] <= 2:
            groups[-1].append(int(k))
        else:
            groups.append([int(k)])
    if len(groups) > 1 and (groups[0][0] + n) - groups[-1][-1] <= 2:
        groups[0] = groups.pop() + groups[0]
    peaks = []
    for grp in groups:
        w = mag[grp]
        # unwrap frequencies of a group straddling the grid edge before averaging
        f = np.unwrap(s.omega[grp], period=s.period)
        freq = float(np.dot(w, f) / w.sum())
        freq = (freq + s.period / 2) % s.period - s.period / 2
        peaks.append(Peak(freq, float(w.max()), tuple(grp), len(grp) > 1))
    peaks.sort(key=lambda p: p.frequency)
    return peaks


@dataclass
class LehmannPeaks:
    frequencies: np.ndarray  # W with G(t) = sum_W w_W exp(-i W t), rad/ms
    weights: np.ndarray  # complex

    def significant(self, rel: float = 1e-3) -> "LehmannPeaks":
        keep = np.abs(self.weights) >= rel * np.abs(self.weights).max(initial=0.0)
        return LehmannPeaks(self.frequencies[keep], self.weights[keep])

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        return (np.exp(-1j * np.outer(t, self.frequencies)) @ self.weights).real


def lehmann_reference(c: np.ndarray, eig: EigenDecomposition, i: int, j: int, *,
                      merge_tol: float = 1e-9, drop: float = 1e-12) -> LehmannPeaks:
    """All lines of the generalised Lehmann sum, equal W merged."""
    if abs(np.vdot(c, c).real - 1.0) > 1e-10:
        raise ValueError("overlaps are not normalised")
    xi = eig.x_elements(i)
    xj = eig.x_elements(j)
    # entry [a, b] oscillates as exp(-i (E_b - E_a) t)
    w = -1j * (c.conj()[:, None] * xi * (xj @ c)[None, :])
    w += 1j * ((c.conj() @ xj)[:, None] * xi * c[None, :])
    E = eig.energies
    W = (E[None, :] - E[:, None]).ravel()
    w = w.ravel()
    nz = np.abs(w) > drop * 1e-3  # prefilter exact zeros from parity selection
    W, w = W[nz], w[nz]
    order = np.argsort(W, kind="stable")
    W, w = W[order], w[order]
    if len(W) == 0:
        return LehmannPeaks(np.zeros(0), np.zeros(0, complex))
    starts = np.flatnonzero(np.concatenate([[True], np.diff(W) > merge_tol]))
    sums = np.add.reduceat(w, starts)
    freqs = np.add.reduceat(W, starts) / np.diff(np.append(starts, len(W)))
    keep = np.abs(sums) >= drop
    return LehmannPeaks(freqs[keep], sums[keep])


@dataclass
class MatchReport:
    matched: list  # (recovered index, reference index, distance)
    unmatched_reference: list
    spurious: list
    sum_artifacts: list  # spurious indices explained by W_a + W_b of reference lines

    def as_dict(self) -> dict:
        return {"matched": [[int(a), int(b), float(d)] for a, b, d in self.matched],
                "unmatched_reference": [int(k) for k in self.unmatched_reference],
                "spurious": [int(k) for k in self.spurious],
                "sum_artifacts": [int(k) for k in self.sum_artifacts]}


def _distance(a, b, period):
    d = np.abs(np.subtract.outer(a, b))
    if period:
        d = np.minimum(d % period, period - d % period)
    return d


def match_peaks(recovered, reference, bin_width: float, period: float | None = None) -> MatchReport:
    """Greedy nearest-frequency matching within one bin, aliasing aware."""
    rec = np.asarray(recovered, float)
    ref = np.asarray(reference, float)
    matched, used_r, used_f = [], set(), set()
    if len(rec) and len(ref):
        d = _distance(rec, ref, period)
        for flat in np.argsort(d, axis=None, kind="stable"):
            a, b = divmod(int(flat), len(ref))
            if d[a, b] > bin_width:
                break
            if a in used_r or b in used_f:
                continue
            matched.append((a, b, float(d[a, b])))
            used_r.add(a)
            used_f.add(b)
    spurious = [a for a in range(len(rec)) if a not in used_r]
    sums = []
    if spurious and len(ref):
        pair = np.add.outer(ref, ref).ravel()
        for a in spurious:
            if np.min(_distance(rec[a:a + 1], pair, period)) <= bin_width:
                sums.append(a)
    unmatched = [b for b in range(len(ref)) if b not in used_f]
    matched.sort()
    return MatchReport(matched, unmatched, spurious, sums)
