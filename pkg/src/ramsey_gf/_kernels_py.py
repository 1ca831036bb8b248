"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and semantics match the extension exactly so that
``ramsey_gf.kernels`` can swap one for the other.
"""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _index_tables(n):
    idx = np.arange(1 << n)
    # Y_k phase on the *output* index: (Y_k psi)[s] = -i (-1)^{s_k} psi[s ^ 2^k]
    yphase = np.array([np.where((idx >> k) & 1, 1j, -1j) for k in range(n)])
    return idx, yphase


def apply_tfim(J, field, psi, out):
    n = J.shape[0]
    idx, yphase = _index_tables(n)
    out[:] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if J[i, j] != 0.0:
                out -= J[i, j] * psi[idx ^ ((1 << i) | (1 << j))]
    if field != 0.0:
        for k in range(n):
            out -= field * yphase[k] * psi[idx ^ (1 << k)]
    return out


def apply_pauli(axis, site, psi, out):
    n = psi.shape[0].bit_length() - 1
    idx, yphase = _index_tables(n)
    mask = 1 << site
    if axis == 0:
        out[:] = psi[idx ^ mask]
    elif axis == 1:
        out[:] = yphase[site] * psi[idx ^ mask]
    else:
        out[:] = np.where(idx & mask, -psi, psi)
    return out


def soft_threshold(x, thr, out):
    mag = np.abs(x)
    scale = np.zeros_like(mag)
    keep = mag > thr
    scale[keep] = 1.0 - thr / mag[keep]
    out[:] = x * scale
    return out
