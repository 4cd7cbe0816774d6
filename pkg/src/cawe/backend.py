"""Kernel backend selection.

The env var CAWE_BACKEND picks the implementation of the hot sequence
kernels:

  CAWE_BACKEND=numba   force the jitted kernels (error if numba missing)
  CAWE_BACKEND=numpy   force the pure-numpy fallback
  unset / auto         numba when importable, numpy otherwise

Either backend is bit-reproducible run to run; the two backends agree
with each other to float round-off (see tests/test_backends.py and
benchmarks/bench_backends.py).
"""

import os

_requested = os.environ.get("CAWE_BACKEND", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"CAWE_BACKEND must be auto|numba|numpy, got {_requested!r}")

if _requested == "numpy":
    from . import kernels_numpy as _impl
else:
    try:
        from . import kernels_numba as _impl
    except ImportError:
        if _requested == "numba":
            raise
        from . import kernels_numpy as _impl

BACKEND = "numba" if _impl.__name__.endswith("numba") else "numpy"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
conv1d_same = _impl.conv1d_same
conv1d_same_multi = _impl.conv1d_same_multi
conv1d_same_multi_backward = _impl.conv1d_same_multi_backward


def active_backend():
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return BACKEND
