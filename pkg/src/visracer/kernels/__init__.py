"""Kernel backend selection.

The compiled Cython core is used when available; a NumPy implementation is
the fallback. Override with VISRACER_KERNELS=numpy|cython (cython raises if
the extension is missing). Both backends produce identical results.
"""

import os

from . import numpy_impl

CLASS_ROAD = numpy_impl.CLASS_ROAD
CLASS_WALL = numpy_impl.CLASS_WALL
CLASS_OFFROAD = numpy_impl.CLASS_OFFROAD

_impl = numpy_impl
_requested = os.environ.get("VISRACER_KERNELS", "auto").lower()
if _requested not in ("auto", "cython", "numpy"):
    raise ValueError(f"VISRACER_KERNELS must be auto|cython|numpy, got {_requested!r}")
if _requested in ("auto", "cython"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise
        _impl = numpy_impl


def backend_name() -> str:
    return _impl.BACKEND


def get_impl(name: str | None = None):
    """Return a specific backend module (for tests and benchmarks)."""
    if name is None:
        return _impl
    if name == "numpy":
        return numpy_impl
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


def classify_points(*args, **kwargs):
    return _impl.classify_points(*args, **kwargs)


def depthwise_forward(*args, **kwargs):
    return _impl.depthwise_forward(*args, **kwargs)


def depthwise_backward(*args, **kwargs):
    return _impl.depthwise_backward(*args, **kwargs)
