import os

import numpy as np
from setuptools import Extension, setup

# MULTISEL_NO_EXT=1 skips the compiled kernels; the package then runs on the
# numpy fallback.
ext_modules = []
if not os.environ.get("MULTISEL_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "multisel._ckernels",
                ["src/multisel/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
