"""Builds the optional compiled simulation kernel.

The package works without it (a pure-Python kernel is selected at import);
set MISSPEC_BANDITS_NO_EXT=1 to skip compilation entirely.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MISSPEC_BANDITS_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "misspec_bandits._kernel_ext",
                    ["src/misspec_bandits/_kernel_ext.pyx"],
                    include_dirs=[np.get_include()],
                    # no -ffast-math: results must match the Python kernel bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
