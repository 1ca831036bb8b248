# cython: language_level=3
"""Compiled state-vector kernels (site 0 is the least significant bit)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def apply_tfim(const double[:, ::1] J, double field,
               const double complex[::1] psi, double complex[::1] out):
    """out = H psi with H = -sum_{i<j} J_ij X_i X_j - field sum_k Y_k."""
    cdef Py_ssize_t dim = psi.shape[0]
    cdef int n = J.shape[0]
    cdef Py_ssize_t s, t
    cdef int i, j, k
    cdef double complex acc, y
    cdef double jij
    with nogil:
        for s in range(dim):
            acc = 0
            for i in range(n):
                for j in range(i + 1, n):
                    jij = J[i, j]
                    if jij != 0.0:
                        acc = acc - jij * psi[s ^ ((1 << i) | (1 << j))]
            if field != 0.0:
                y = 0
                for k in range(n):
                    t = s ^ (1 << k)
                    # (Y_k psi)[s] = -i (-1)^{s_k} psi[s ^ 2^k]
                    if (s >> k) & 1:
                        y = y + 1j * psi[t]
                    else:
                        y = y - 1j * psi[t]
                acc = acc - field * y
            out[s] = acc
    return np.asarray(out)


def apply_pauli(int axis, int site, const double complex[::1] psi,
                double complex[::1] out):
    """out = sigma^(axis)_site psi, axis 0/1/2 for x/y/z."""
    cdef Py_ssize_t dim = psi.shape[0]
    cdef Py_ssize_t s
    cdef Py_ssize_t mask = 1 << site
    with nogil:
        if axis == 0:
            for s in range(dim):
                out[s] = psi[s ^ mask]
        elif axis == 1:
            for s in range(dim):
                if s & mask:
                    out[s] = 1j * psi[s ^ mask]
                else:
                    out[s] = -1j * psi[s ^ mask]
        else:
            for s in range(dim):
                if s & mask:
                    out[s] = -psi[s]
                else:
                    out[s] = psi[s]
    return np.asarray(out)


def soft_threshold(const double complex[::1] x, double thr,
                   double complex[::1] out):
    """Complex shrinkage x * max(0, 1 - thr/|x|)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k
    cdef double mag, re, im
    with nogil:
        for k in range(n):
            re = x[k].real
            im = x[k].imag
            mag = sqrt(re * re + im * im)
            if mag <= thr:
                out[k] = 0
            else:
                out[k] = x[k] * (1.0 - thr / mag)
    return np.asarray(out)
