"""Build script: compiles the optional Cython sampling kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here degrades gracefully.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rydbell._sampler_cy",
                sources=["src/rydbell/_sampler_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
