"""Build script: compiles the Cython Pareto kernels when possible.

The extension is optional. If Cython or a C compiler is unavailable the
package installs anyway and falls back to the pure-Python kernels at
import time (see optiloop._kernels).
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
                "optiloop._kernels._pareto_cy",
                sources=["src/optiloop/_kernels/_pareto_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
