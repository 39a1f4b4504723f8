"""Build script for the optional compiled kernels.

The package works without them: ``strategic_lqg.kernels`` falls back to the
pure-Python implementations when ``_ckernels`` cannot be imported.
"""
import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("STRATEGIC_LQG_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "strategic_lqg._ckernels",
                ["src/strategic_lqg/_ckernels.pyx"],
                # no contraction: the normal transform must match libm calls
                # made by the pure-Python path bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
                libraries=["m"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
