"""Build hook for the optional compiled kernel.

The package is fully functional without the extension (a pure-Python
backend is selected at import time), so a failed compile must not fail
the install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "handover._kernel._native",
                ["src/handover/_kernel/_native.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
