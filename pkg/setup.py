"""Build script for the optional compiled kernel.

The package is fully functional without the extension (a pure-Python kernel
is selected at import time); the extension only accelerates the audit hot
loops, so its build is marked optional and failures degrade to the fallback.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext = Extension(
        "diffmech._kernel._speedups",
        ["src/diffmech/_kernel/_speedups.pyx"],
        extra_compile_args=["-O3"],
    )
    ext.optional = True
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
