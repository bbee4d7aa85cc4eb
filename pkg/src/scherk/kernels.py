"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``SCHERK_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

try:
    if os.environ.get("SCHERK_PURE_PYTHON"):
        raise ImportError("fallback requested")
    from . import _kernels as _impl
    COMPILED = True
except ImportError:
    _impl = _fallback
    COMPILED = False

scan_inscribed = _impl.scan_inscribed
assemble = _impl.assemble

__all__ = ["COMPILED", "scan_inscribed", "assemble"]
