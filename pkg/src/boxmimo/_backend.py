"""Kernel backend selection.

The compiled extension ``boxmimo._core`` is used when it imports; otherwise
the pure-Python kernels are used. Setting ``BOXMIMO_BACKEND=python`` before
import, or calling :func:`set_backend`, forces the fallback.
"""

from __future__ import annotations

import os

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = "compiled" if _compiled is not None and os.environ.get("BOXMIMO_BACKEND", "").lower() != "python" else "python"


def compiled_available() -> bool:
    return _compiled is not None


def active() -> str:
    return _active


def set_backend(name: str) -> str:
    """Switch backends; returns the previously active name."""
    global _active
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _compiled is None:
        raise RuntimeError("compiled extension boxmimo._core is not available")
    prev, _active = _active, name
    return prev


def core():
    """The compiled module when active, else None."""
    return _compiled if _active == "compiled" else None
