"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``OPINIONFORGE_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("OPINIONFORGE_BACKEND", "").lower() in ("python", "py", "numpy"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND: str = _impl.BACKEND
logit_logpmf = _impl.logit_logpmf
edge_log_weights = _impl.edge_log_weights
sample_opinions = _impl.sample_opinions


def num_threads() -> int:
    """Worker cap from ``OPINIONFORGE_THREADS`` (0 or unset = all cores)."""
    raw = os.environ.get("OPINIONFORGE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
