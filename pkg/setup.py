import numpy
from setuptools import setup
from setuptools.extension import Extension

from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        [
            Extension(
                "tcemu._kernel",
                ["src/tcemu/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    ),
)
