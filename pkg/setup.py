"""Build script for the compiled convolution kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it just makes training faster.
"""

from setuptools import Extension, setup

import numpy as np

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "crdoco._convkernels",
        ["src/crdoco/_convkernels.pyx", "src/crdoco/_conv_impl.c"],
        include_dirs=[np.get_include(), "src/crdoco"],
        extra_compile_args=["-O3", "-funroll-loops", "-fno-wrapv"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, language_level="3") if cythonize else [],
)
