"""Build script for the compiled convolution kernels.

The extension is optional: if no C compiler (or Cython) is available the
package installs anyway and falls back to the pure-numpy kernels at import
time (see gcml.kernels).
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "gcml.kernels._core",
        sources=["src/gcml/kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
    ext_modules = cythonize(
        [ext], compiler_directives={"language_level": "3"}, annotate=False
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
