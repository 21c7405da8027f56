"""Select the compiled kernels when available, else the numpy fallback.

Set ``LABOR_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pure

BACKEND = "pure"
if os.environ.get("LABOR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pure
else:
    _impl = _pure

hash_uniform = _impl.hash_uniform
solve_scale_segments = _impl.solve_scale_segments
scatter_max = _impl.scatter_max
bottom_k_segments = _impl.bottom_k_segments


def backends():
    """Mapping of every importable backend name to its module."""
    found = {"pure": _pure}
    try:
        from . import _core

        found["cython"] = _core
    except ImportError:
        pass
    return found
