import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # sdist without Cython: the pure-Python kernels are used
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("PREDINSPECT_NO_EXT") != "1":
    ext_modules = cythonize(
        [Extension("predinspect._kernels", ["src/predinspect/_kernels.pyx"],
                   include_dirs=[np.get_include()],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
