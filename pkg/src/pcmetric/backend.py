"""Kernel backend selection.

The hot kernels (batched 1-NN, k-NN and local-PCA normals) exist twice:
numba @njit loops in ``_kernels_numba`` and a vectorized numpy fallback in
``_kernels_numpy``. The default is numba whenever it imports; setting
``PCMETRIC_DISABLE_NUMBA=1`` switches the default to the numpy path. Every
function that reaches a kernel also takes ``backend="numba"|"numpy"`` to
override per call, which is what ``benchmarks/compare_backends.py`` uses to
time both sides in one process.
"""

from __future__ import annotations

import os
from functools import lru_cache

from .errors import DataError

ENV_FLAG = "PCMETRIC_DISABLE_NUMBA"

BACKENDS = ("numba", "numpy")


@lru_cache(maxsize=1)
def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def numba_disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes"}


def default_backend() -> str:
    if numba_disabled_by_env() or not numba_available():
        return "numpy"
    return "numba"


def resolve_backend(backend: str | None) -> str:
    """Return the concrete backend name for a user-supplied value."""
    if backend is None:
        return default_backend()
    if backend not in BACKENDS:
        raise DataError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend == "numba" and not numba_available():
        raise DataError("backend 'numba' requested but numba is not importable")
    return backend


def get_kernels(backend: str | None):
    """Import and return the kernel module for a backend name."""
    name = resolve_backend(backend)
    if name == "numba":
        from . import _kernels_numba as mod
    else:
        from . import _kernels_numpy as mod
    return mod
