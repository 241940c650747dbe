"""LSTM layer kernel backends.

Two interchangeable implementations of the time-loop kernels exist:

* ``numba_backend`` - ``@njit``-compiled loops (default when numba imports)
* ``numpy_backend`` - pure vectorized numpy (reference / fallback path)

Selection is controlled by the ``KPRNN_BACKEND`` environment variable
("auto", "numba" or "numpy"; default "auto") read at import time, or by
calling :func:`set_backend` at runtime.  Both backends compute the same
floating point recurrences; results agree to ~1e-12 but are not
guaranteed bitwise identical across backends.
"""

from __future__ import annotations

import os

from . import numpy_backend

ENV_VAR = "KPRNN_BACKEND"

try:
    from . import numba_backend

    _NUMBA_ERROR = None
except ImportError as exc:  # pragma: no cover - depends on environment
    numba_backend = None
    _NUMBA_ERROR = exc

_BACKENDS = {"numpy": numpy_backend}
if numba_backend is not None:
    _BACKENDS["numba"] = numba_backend


def available() -> tuple:
    """Names of importable backends ("numpy" is always present)."""
    return tuple(sorted(_BACKENDS))


def _resolve(name: str):
    if name == "auto":
        return _BACKENDS.get("numba", numpy_backend)
    if name not in ("numpy", "numba"):
        raise ValueError(f"unknown backend {name!r} (use auto, numba or numpy)")
    if name not in _BACKENDS:
        raise RuntimeError(f"backend {name!r} unavailable: {_NUMBA_ERROR}")
    return _BACKENDS[name]


_active = _resolve(os.environ.get(ENV_VAR, "auto").strip().lower() or "auto")


def set_backend(name: str):
    """Switch the active kernel backend; returns the backend module."""
    global _active
    _active = _resolve(name)
    return _active


def get_backend():
    return _active


def active_name() -> str:
    return _active.NAME
