"""Build hooks for the optional compiled flow kernel.

The package is pure Python by default.  When Cython is available the
extension is built from ``_fastflow.pyx``; otherwise the checked-in
generated C file is used.  Build failures are non-fatal: the package then
runs on the pure-Python twin of the kernel.
"""

import os

from setuptools import Extension, setup

# -ffp-contract=off keeps the arithmetic bit-identical to the pure-Python
# twin (no FMA contraction).
COMPILE_ARGS = ["-O3", "-ffp-contract=off"]

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gaitfam._fastflow",
                ["src/gaitfam/_fastflow.pyx"],
                extra_compile_args=COMPILE_ARGS,
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    if os.path.exists(os.path.join("src", "gaitfam", "_fastflow.c")):
        ext_modules = [
            Extension(
                "gaitfam._fastflow",
                ["src/gaitfam/_fastflow.c"],
                extra_compile_args=COMPILE_ARGS,
                optional=True,
            )
        ]

setup(ext_modules=ext_modules)
