"""Build the optional Cython kernels.

The extension is optional: when Cython or a compiler is unavailable the
package installs without it and ``ramsey_gf.kernels`` falls back to the
numpy implementation.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("RAMSEY_GF_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ramsey_gf._kernels",
                    ["src/ramsey_gf/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
