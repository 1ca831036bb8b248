"""Spectral moments of the retarded Green's function and a reference spectral function.

Two conventions live side by side. The closed-form sum rules are evaluated
exactly as stated (with their 1/pi prefactors). The derivative moments use
mu_n = -Im[i^n d^n G/dt^n] at 0+, which equals int w^n A(w) dw for
A(w) = -(1/pi) Im int_0^inf G(t) e^{iwt} dt. The two differ by constant
factors; the report carries both and their ratios.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spin_system import apply_pauli, expectation, n_sites
from .trap_chain import CouplingMatrix
from .units import to_angular


class StepUnderflowError(ArithmeticError):
    pass


@dataclass
class MomentReport:
    i: int
    j: int
    analytic: np.ndarray | None = None  # closed-form sum rules, orders 0..3
    numeric: np.ndarray | None = None  # derivative moments, orders 0..3
    derivatives: np.ndarray | None = None  # raw d^n G / dt^n at 0+
    meta: dict = field(default_factory=dict)

    def merged(self, other: "MomentReport") -> "MomentReport":
        pick = lambda a, b: a if a is not None else b
        return MomentReport(self.i, self.j, pick(self.analytic, other.analytic),
                            pick(self.numeric, other.numeric),
                            pick(self.derivatives, other.derivatives), {**other.meta, **self.meta})

    @property
    def ratios(self) -> np.ndarray:
        """analytic / numeric per order; nan where either side vanishes."""
        a = np.asarray(self.analytic, float)
        b = np.asarray(self.numeric, float)
        out = np.full(4, np.nan)
        ok = (np.abs(a) > 0) & (np.abs(b) > 0)
        out[ok] = a[ok] / b[ok]
        return out

    def as_dict(self) -> dict:
        lst = lambda v: None if v is None else [float(x) for x in v]
        return {"i": self.i, "j": self.j, "analytic": lst(self.analytic),
                "numeric": lst(self.numeric), "derivatives": lst(self.derivatives),
                "ratios": [None if np.isnan(r) else float(r) for r in self.ratios]
                if self.analytic is not None and self.numeric is not None else None,
                **self.meta}


def _y(k):
    return lambda v: apply_pauli("y", k, v)


def _chain(*ops):
    def f(v):
        for op in reversed(ops):  # rightmost acts first
            v = op(v)
        return v
    return f


def analytic_moments(psi0: np.ndarray, couplings: CouplingMatrix | np.ndarray, field: float,
                     i: int, j: int) -> MomentReport:
    """Closed-form sum rules for orders 0..3.

    ``couplings`` are in kHz (a CouplingMatrix or a raw matrix) and ``field``
    is the angular transverse field; the Ising couplings are converted to
    angular units so both enter alike. Expectations of the non-Hermitian
    operator products in the on-site cubic term keep their real part.
    """
    J = to_angular(couplings.J if isinstance(couplings, CouplingMatrix) else np.asarray(couplings))
    n = n_sites(len(psi0))
    B = float(field)
    mu = np.zeros(4)
    if i == j:
        mu[1] = 4.0 / np.pi * B * expectation(psi0, _y(i)).real
    mu[3] = -8.0 / np.pi * B ** 2 * J[i, j] * expectation(psi0, _chain(_y(i), _y(j))).real
    if i == j:
        yi = apply_pauli("y", i, psi0)
        xx = np.zeros_like(yi)
        for k in range(n):
            for kp in range(n):
                w = J[i, k] * J[i, kp]
                if w != 0.0:
                    xx += w * apply_pauli("x", k, apply_pauli("x", kp, yi))
        mu[3] += (np.vdot(psi0, B * (16.0 * B ** 2 * yi + xx)).real) / (2.0 * np.pi)
        s = 0.0
        for k in range(n):
            if J[i, k] == 0.0:
                continue
            s += J[i, k] * (expectation(psi0, _chain(lambda v, k=k: apply_pauli("x", k, v),
                                                     lambda v: apply_pauli("x", i, v)))
                            + expectation(psi0, _chain(lambda v, k=k: apply_pauli("z", k, v),
                                                       lambda v: apply_pauli("z", i, v)))).real
        mu[3] += 4.0 / np.pi * B ** 2 * s
    return MomentReport(i, j, analytic=mu, meta={"field": B})


_STENCILS = {
    0: ((0.0,), (1.0,)),
    1: ((1.0, -1.0), (0.5, -0.5)),
    2: ((1.0, 0.0, -1.0), (1.0, -2.0, 1.0)),
    3: ((2.0, 1.0, -1.0, -2.0), (0.5, -1.0, 1.0, -0.5)),
}


def _central(g, n, h):
    offs, w = _STENCILS[n]
    vals = np.asarray(g(np.array(offs) * h), dtype=float)
    return float(np.dot(w, vals)) / h ** n


def derivatives_at_zero(g: Callable, h: float, order_max: int = 3, levels: int = 3) -> np.ndarray:
    """Central differences at 0 with Richardson extrapolation over h, h/2, h/4.

    ``g`` must accept negative times (the analytic continuation of G from 0+).
    """
    if not h > 0 or (h / 2 ** (levels - 1)) ** order_max == 0.0 or h / 2 ** (levels - 1) < 1e-15:
        raise StepUnderflowError(f"finite-difference step {h!r} underflows")
    out = np.zeros(order_max + 1)
    for n in range(order_max + 1):
        table = [_central(g, n, h / 2 ** k) for k in range(levels)]
        for m in range(1, levels):  # central stencils have even error series
            f = 4.0 ** m
            table = [(f * table[k + 1] - table[k]) / (f - 1.0) for k in range(len(table) - 1)]
        out[n] = table[0]
    return out


STEP_FACTOR = 0.3


def default_step(spectral_radius: float) -> float:
    """Base step 0.3/max|E| for the moment stencils.

    Truncation error of the extrapolated stencils grows like (h max|E|)^6 and
    roundoff like eps/h^3; this factor sits near the minimum of the sum.
    """
    if not spectral_radius > 0:
        raise StepUnderflowError("spectral radius must be positive")
    return STEP_FACTOR / spectral_radius


def numeric_moments(g: Callable, order_max: int = 3, h: float = 1e-3, *,
                    i: int = -1, j: int = -1) -> MomentReport:
    """Derivative moments -Im[i^n d^n g] at 0+ for n <= order_max."""
    d = derivatives_at_zero(g, h, order_max)
    mu = np.array([-(1j ** n * d[n]).imag for n in range(order_max + 1)])
    pad = lambda v: np.pad(v, (0, 4 - len(v)))
    return MomentReport(i, j, numeric=pad(mu), derivatives=pad(d), meta={"step": h})


@dataclass
class SpectralFunction:
    omega: np.ndarray  # rad/ms
    values: np.ndarray
    window: str = "none"
    T: float = 0.0

    def moment(self, n: int) -> float:
        return float(np.trapezoid(self.omega ** n * self.values, self.omega))


def _taper(t, T, window):
    if window == "none":
        return np.ones_like(t)
    if window == "half-hann":
        return np.cos(0.5 * np.pi * t / T) ** 2
    raise ValueError(f"unknown window {window!r}")


def spectral_function(trace, omega: np.ndarray | None = None, window: str = "half-hann") -> SpectralFunction:
    """A(w) = -(1/pi) Im int_0^T G(t) w(t) e^{iwt} dt by trapezoid quadrature."""
    t = np.asarray(trace.times, float)
    g = np.asarray(trace.values, float)
    if len(t) < 2:
        raise ValueError("trace needs at least two samples")
    T = t[-1] - t[0]
    if omega is None:
        nyq = np.pi / (t[1] - t[0])
        omega = np.linspace(-nyq, nyq, 2 * len(t) + 1)
    gw = g * _taper(t - t[0], T, window)
    kernel = np.sin(np.outer(omega, t - t[0]))  # Im e^{iwt} for real G
    A = -np.trapezoid(kernel * gw[None, :], t, axis=1) / np.pi
    return SpectralFunction(np.asarray(omega, float), A, window, float(T))
