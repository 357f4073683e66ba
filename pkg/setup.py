"""Build script for the optional compiled kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it just makes the dense-factor hot loops faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "slamplan._chol",
                ["src/slamplan/_chol.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
