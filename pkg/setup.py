import os

from setuptools import Extension, setup

# The compiled kernels are an optional speedup; the package falls back to
# pure numpy implementations when the extension is absent.
# Set ANCHORINV_PURE=1 to skip compilation entirely.
ext_modules = []
if os.environ.get("ANCHORINV_PURE") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "anchorinv.backends._kernels_cy",
                    ["src/anchorinv/backends/_kernels_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
