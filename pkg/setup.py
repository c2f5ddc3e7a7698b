"""Build script for the compiled kernel extension.

The package works without the extension (the numpy kernel backend is selected
at import); building it just makes the hot paths faster. If Cython or a C
compiler is unavailable the install proceeds without the extension.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "softlabels.kernels._fast",
                ["src/softlabels/kernels/_fast.pyx"],
                extra_compile_args=["-O3", "-march=native", "-funroll-loops"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
