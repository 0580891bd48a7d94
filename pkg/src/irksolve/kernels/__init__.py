"""Hot block-kernel backends.

The numba backend is used by default when numba imports cleanly; set
``IRKSOLVE_BACKEND=numpy`` (or ``numba``) to force a choice.  Both
backends implement identical algorithms with identical loop orderings.
"""

from __future__ import annotations

import os

from . import numpy_backend

_backend = None


def _select_initial():
    choice = os.environ.get("IRKSOLVE_BACKEND", "auto").lower()
    if choice == "numpy":
        return numpy_backend
    if choice in ("auto", "numba"):
        try:
            from . import numba_backend
            return numba_backend
        except ImportError:
            if choice == "numba":
                raise
            return numpy_backend
    raise ValueError(f"IRKSOLVE_BACKEND={choice!r}; expected numba, numpy, or auto")


def get_backend():
    global _backend
    if _backend is None:
        _backend = _select_initial()
    return _backend


def set_backend(name: str):
    """Override the backend ('numba' or 'numpy'); returns the module."""
    global _backend
    if name == "numpy":
        _backend = numpy_backend
    elif name == "numba":
        from . import numba_backend
        _backend = numba_backend
    else:
        raise ValueError(f"unknown backend {name!r}")
    return _backend
