"""Pick the compiled kernels when available, else the numpy fallback.

Set ``BPCODES_PURE=1`` to force the fallback.
"""

import os

if os.environ.get("BPCODES_PURE", "") not in ("", "0"):
    from . import _fallback as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels

        BACKEND = "cython"
    except ImportError:
        from . import _fallback as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
