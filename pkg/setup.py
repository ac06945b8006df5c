"""Build script.

The compiled extension holding the hot solver loops is optional: when
Cython or a C compiler is unavailable the package installs anyway and
falls back to the pure-Python loops (see ``vropt._kernels``).
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "vropt._kernels._glmloops",
                ["src/vropt/_kernels/_glmloops.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
