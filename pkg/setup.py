import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mimoarq._mi_kernel",
                ["src/mimoarq/_mi_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython: install pure-Python only; mimoarq.kernels falls back at import.
    ext_modules = []

setup(ext_modules=ext_modules)
