import os

import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

randomlib = os.path.join(os.path.dirname(np.random.__file__), "lib")

ext = Extension(
    "dpseg._kernels",
    ["src/dpseg/_kernels.pyx"],
    include_dirs=[np.get_include()],
    library_dirs=[randomlib],
    libraries=["npyrandom"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3"],
)

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))
