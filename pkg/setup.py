import os

import numpy as np
from setuptools import Extension, setup

# SALBENCH_NO_EXT=1 skips the compiled core; the package then runs on the numpy fallback.
ext_modules = []
if not os.environ.get("SALBENCH_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "salbench._kernels",
                    ["src/salbench/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no -ffast-math / FMA contraction: loop order is part of the contract
                    extra_compile_args=["-O3", "-ffp-contract=off", "-march=native"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
