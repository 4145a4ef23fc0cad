"""Build script: compiles the optional Kalman kernel extension.

The compiled extension is a pure speedup; if Cython or a C compiler is
missing, installation proceeds and the package falls back to the numpy
kernels at import time.
"""
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build extensions, downgrading compiler failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing toolchain
            warnings.warn(f"skipping compiled kernels: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping compiled kernel {ext.name}: {exc}")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; installing with numpy kernels only")
        return []
    ext = Extension(
        "sdsbm._kernels._ckalman",
        sources=["src/sdsbm/_kernels/_ckalman.pyx"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
