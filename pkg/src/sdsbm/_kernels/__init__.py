"""Kernel backend selection.

The hot per-step loops (Kalman forward pass, RTS backward pass) exist
twice: a Cython extension (``_ckalman``) and a numpy reference
(``_pykalman``). The compiled kernel is used when importable; set
``SDSBM_BACKEND=python`` or ``SDSBM_BACKEND=compiled`` to force one.
"""
from __future__ import annotations

import os

from sdsbm.errors import ValidationError

from . import _pykalman

try:
    from . import _ckalman  # type: ignore[attr-defined]
except ImportError:
    _ckalman = None

_MODULES = {"python": _pykalman}
if _ckalman is not None:
    _MODULES["compiled"] = _ckalman


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_MODULES))


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: env var or fastest)."""
    if name is None:
        name = os.environ.get("SDSBM_BACKEND", "auto").lower()
    if name in ("auto", ""):
        name = "compiled" if "compiled" in _MODULES else "python"
    if name not in _MODULES:
        raise ValidationError(
            f"unknown kernel backend {name!r}; available: {available_backends()}"
        )
    return _MODULES[name]


def default_backend_name() -> str:
    mod = get_backend(None)
    return "compiled" if mod is not _pykalman else "python"
