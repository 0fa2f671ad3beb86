"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Set ``LOCTIME_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

FIXED, HIT, COVER, INVLT, BUDGET = (_kernels_py.FIXED, _kernels_py.HIT, _kernels_py.COVER,
                                    _kernels_py.INVLT, _kernels_py.BUDGET)
NEED, DONE, FULL = _kernels_py.NEED, _kernels_py.DONE, _kernels_py.FULL


def _load():
    if os.environ.get("LOCTIME_BACKEND", "").lower() in ("python", "py", "numpy"):
        return _kernels_py, "python"
    try:
        from . import _kernels
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "compiled"


backend, BACKEND = _load()


def get_backend(name: str | None = None):
    """Kernel module by name: ``"compiled"``, ``"python"`` or the active one."""
    if name is None:
        return backend
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
