"""Build glue for the compiled kernel extension.

The package works without the extension (the NumPy fallback is selected at
import time), so a failed compile should not block a source install; remove
the extension block below if a toolchain is unavailable.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "shelltriage._native",
        ["src/shelltriage/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
