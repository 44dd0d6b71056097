"""Hot numerical kernels with a compiled core and a pure-NumPy fallback.

The Bellman min-trace evaluation and the frozen-control Jacobi sweep dominate
solver runtime, so they exist twice: `_speedups` is a Cython extension built
at install time, `numpy_backend` is the vectorized reference used when the
extension is unavailable (or when CMA_FORCE_NUMPY is set).  Both expose the
same array-level API and are cross-checked by the test suite.
"""

import os

from . import numpy_backend

try:
    from . import _speedups
except ImportError:
    _speedups = None

HAVE_EXT = _speedups is not None


def active_backend():
    if os.environ.get("CMA_FORCE_NUMPY"):
        return numpy_backend
    return _speedups if HAVE_EXT else numpy_backend


def backend_name():
    return "compiled" if active_backend() is _speedups else "numpy"
