"""Builds the optional compiled simulation kernel.

The package works without it; ``dcfdelay.sim`` falls back to the pure-Python
event loop when the extension is missing.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("DCFDELAY_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "dcfdelay.sim._ckernel",
                    ["src/dcfdelay/sim/_ckernel.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
