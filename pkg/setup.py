"""Build script: compiles the optional Cython kernel extension.

If Cython or a C compiler is unavailable the build degrades to the pure
NumPy backend (linbai._kernels_py), which is selected automatically at
import time.
"""
import numpy as np
from setuptools import Extension, setup


def make_ext_modules():
    try:
        from Cython.Build import cythonize
    except ImportError as exc:  # pragma: no cover - build-time only
        print(f"linbai: cython unavailable ({exc}); compiled backend skipped")
        return []
    import os

    # the Gaussian generator symbols live in numpy's static npyrandom library
    npyrandom_dir = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext = Extension(
        "linbai._kernels",
        ["src/linbai/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[npyrandom_dir],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(ext_modules=make_ext_modules())
