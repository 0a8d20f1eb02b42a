import warnings

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the thinning kernel if possible; fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler etc.
            warnings.warn(f"compiled thinning kernel skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled thinning kernel skipped: {exc}")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "netsteer.pointproc._thinning",
        ["src/netsteer/pointproc/_thinning.pyx"],
        include_dirs=[np.get_include()],
        # -O3 only: no -ffast-math / -march=native, the kernel must stay
        # bit-identical to the pure-Python backend (IEEE semantics).
        extra_compile_args=["-O3"],
    )
    return cythonize(
        ext,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
        quiet=True,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
