import os
import sys

import numpy as np
from setuptools import Extension, setup

ext_kwargs = dict(include_dirs=[np.get_include()])
if sys.platform.startswith("linux") and not os.environ.get("OPINIONFORGE_NO_OPENMP"):
    ext_kwargs["extra_compile_args"] = ["-O3", "-fopenmp"]
    ext_kwargs["extra_link_args"] = ["-fopenmp"]

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back to numpy
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("opinionforge._ckernels", ["src/opinionforge/_ckernels.pyx"], **ext_kwargs)],
        language_level="3",
    )

setup(ext_modules=ext_modules)
