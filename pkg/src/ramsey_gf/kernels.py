"""Backend selection for the state-vector kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``RAMSEY_GF_PURE_PYTHON=1`` is set, the numpy
implementation is used. ``BACKEND`` names the active choice.
"""
import os

from . import _kernels_py

if os.environ.get("RAMSEY_GF_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

apply_tfim = _impl.apply_tfim
apply_pauli = _impl.apply_pauli
soft_threshold = _impl.soft_threshold

PYTHON_KERNELS = _kernels_py
