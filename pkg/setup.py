"""Build the optional compiled kernel; the package works without it."""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PTP_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("ptp._ground_ext", ["src/ptp/_ground_ext.pyx"], language="c++",
                       extra_compile_args=["-O3", "-std=c++17"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
