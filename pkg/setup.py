import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("NEUROSPIKE_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "neurospike._ckernel",
                    ["src/neurospike/_ckernel.pyx"],
                    # no contraction into FMA: results must match the Python engine bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
