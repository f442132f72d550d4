import os

from setuptools import setup

ext_modules = []
if not os.environ.get("NFT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "nftrees._core",
                    ["src/nftrees/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # No Cython/numpy at build time: install pure-Python only; the
        # inference backend falls back automatically at import.
        ext_modules = []

setup(ext_modules=ext_modules)
