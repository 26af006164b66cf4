"""Selects the Q-network kernel backend at import time.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is always available. ``SKYNOMA_BACKEND=numpy|cython`` forces a
choice (forcing cython raises if the extension is missing).
"""
from __future__ import annotations

import os

from . import _mlp_np

try:
    from . import _mlp_cy
except ImportError:
    _mlp_cy = None

_BACKENDS = {"numpy": _mlp_np}
if _mlp_cy is not None:
    _BACKENDS["cython"] = _mlp_cy


def get_kernels(name: str | None = None):
    """Kernel module by name, or the active default when name is None."""
    if name is None:
        return ACTIVE
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available (have: {sorted(_BACKENDS)})") from None


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


_requested = os.environ.get("SKYNOMA_BACKEND", "auto")
if _requested == "auto":
    ACTIVE = _BACKENDS.get("cython", _mlp_np)
else:
    ACTIVE = get_kernels(_requested)
