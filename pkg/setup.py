"""Build script: compiles the optional Cython cavity kernel.

The package works without the compiled extension (a NumPy fallback is
selected at import time); set SPECKLE_PUF_NO_EXT=1 to skip compilation.
"""
import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise warn and continue."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the Cython kernel failed ({exc}); "
            "falling back to the pure-NumPy backend.",
            file=sys.stderr,
        )


_PYX = "src/speckle_puf/_kernels/_cavity_cy.pyx"
ext_modules = []
if os.environ.get("SPECKLE_PUF_NO_EXT") != "1" and os.path.exists(_PYX):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "speckle_puf._kernels._cavity_cy",
                    [_PYX],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
