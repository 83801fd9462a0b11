"""Build script for the optional compiled clustering kernel.

The package works without the extension (a pure-Python fallback is selected
at import time), so a failed compile only costs speed.
"""

import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "colorwai._kernels._palette",
                ["src/colorwai/_kernels/_palette.pyx"],
                include_dirs=[numpy.get_include()],
                # No -ffast-math / -march=native: the fallback must match
                # the compiled kernel bit for bit (IEEE semantics, no FMA).
                extra_compile_args=["-O2"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"colorwai: skipping compiled kernel ({exc})", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
