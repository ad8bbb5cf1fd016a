"""Builds the optional compiled kernel core.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the Cython core just makes the per-tick hot loops
(depthwise convolution, ground-pixel classification) several times faster.
Set VISRACER_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("VISRACER_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "visracer.kernels._core",
                    ["src/visracer/kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    # -ffp-contract=off keeps float results bit-identical to
                    # the NumPy fallback (no FMA contraction).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
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
    except Exception as exc:  # pragma: no cover - build-env dependent
        print(f"visracer: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
