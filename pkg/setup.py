"""Build script: compiles the optional Cython propagator kernel.

The package works without the extension (a numpy/scipy fallback is selected
at import time), so any build failure here downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "warmlink.engine._rk4_cy",
                ["src/warmlink/engine/_rk4_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"warmlink: skipping Cython kernel build ({exc}); "
                     "falling back to the pure-Python propagator\n")

setup(ext_modules=ext_modules)
