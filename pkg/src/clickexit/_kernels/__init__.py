"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set
``CLICKEXIT_PURE_PYTHON=1`` to force the fallback.
"""

import math
import os

import numpy as np

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("CLICKEXIT_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

joint_counts = backend.joint_counts
session_breaks = backend.session_breaks
grow_tree = backend.grow_tree
apply_tree = backend.apply_tree

_XLX_CACHE = np.zeros(1, dtype=np.float64)


def xlogx_table(n: int) -> np.ndarray:
    """``t[k] = k * log2(k)`` for ``k <= n`` (``t[0] = 0``), shared by both backends."""
    global _XLX_CACHE
    if len(_XLX_CACHE) <= n:
        size = max(n + 1, 2 * len(_XLX_CACHE))
        table = np.zeros(size, dtype=np.float64)
        for k in range(1, size):
            table[k] = k * math.log2(k)
        _XLX_CACHE = table
    return _XLX_CACHE
