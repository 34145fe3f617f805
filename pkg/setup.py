"""Build script for the compiled replication-RNG kernel.

The extension is optional: if Cython or a C toolchain is unavailable the
package installs anyway and falls back to the pure-numpy backend at import
time (see sfbm_extremes.rng).
"""

import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


def extensions():
    if cythonize is None:
        return []
    randlib = os.path.join(os.path.dirname(np.random.__file__), "lib")
    ext = Extension(
        "sfbm_extremes._rng_kernels",
        ["src/sfbm_extremes/_rng_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[randlib],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
