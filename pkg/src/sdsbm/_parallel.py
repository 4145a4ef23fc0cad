"""Thread-count resolution shared by block fitting and experiment sweeps."""
from __future__ import annotations

import os

from .errors import ValidationError


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: explicit argument, else SDSBM_THREADS, 0 means auto."""
    if requested is None:
        raw = os.environ.get("SDSBM_THREADS", "0")
        try:
            requested = int(raw)
        except ValueError:
            raise ValidationError(f"SDSBM_THREADS must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValidationError(f"thread count must be >= 0, got {requested}")
    if requested == 0:
        return os.cpu_count() or 1
    return requested
