"""Kernel selection: the compiled extension when it imports, the pure-Python one otherwise.

Set ``PREDINSPECT_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("PREDINSPECT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        log.info("compiled kernels unavailable, using the pure-Python fallback")

cast_rays = _impl.cast_rays
count_visible = _impl.count_visible

UNKNOWN, FREE, OCC = _kernels_py.UNKNOWN, _kernels_py.FREE, _kernels_py.OCC

__all__ = ["cast_rays", "count_visible", "BACKEND", "UNKNOWN", "FREE", "OCC"]
