"""Build the optional compiled kernels.

The package works without them: ``rica._kernels`` falls back to numpy when the
extension is missing, so a failed compile only costs speed.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("RICA_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "rica._ksg_ext",
                    ["src/rica/_ksg_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                ),
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
