"""Root-polishing kernels: compiled extension with pure-NumPy fallback.

The compiled kernel is preferred when importable; set RIGPOSE_BACKEND to
"python" or "cython" to force one.
"""

import os

from . import numpy_backend

try:
    from . import _gn_cython
except ImportError:  # pragma: no cover - build-dependent
    _gn_cython = None

DEFAULT = os.environ.get("RIGPOSE_BACKEND", "auto")


def available_backends():
    names = ["numpy"]
    if _gn_cython is not None:
        names.insert(0, "cython")
    return names


def get_backend(name: str = "auto"):
    """Resolve a backend module exposing gauss_newton_roots."""
    if name == "auto":
        name = DEFAULT
    if name == "auto":
        name = "cython" if _gn_cython is not None else "numpy"
    if name in ("python", "numpy"):
        return numpy_backend
    if name == "cython":
        if _gn_cython is None:
            raise RuntimeError("compiled kernel not available; build the extension or use numpy")
        return _gn_cython
    raise ValueError(f"unknown backend {name!r}")
