"""Build script. The simulation kernels have an optional Cython extension;
when Cython or a C compiler is unavailable the package installs without it
and falls back to the numpy implementation at import time."""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("POLYREACH_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize
        import numpy

        ext_modules = cythonize(
            ["src/polyreach/_kernels/_fast.pyx"],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )
        for ext in ext_modules:
            ext.include_dirs.append(numpy.get_include())
    except Exception:
        ext_modules = []

setup(ext_modules=ext_modules)
