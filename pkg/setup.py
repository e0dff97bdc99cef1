"""Build the optional compiled propagation kernel.

The package works without it: ``tclham._kernels`` falls back to the
numpy implementation in ``tclham._kernels_py`` when the extension is absent.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("TCLHAM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "tclham._kernels_cy",
                    ["src/tclham/_kernels_cy.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=[
                        "-O3",
                        # lets the fused row reductions vectorize
                        "-fno-math-errno",
                        "-fno-trapping-math",
                        "-fassociative-math",
                        "-fno-signed-zeros",
                    ],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
