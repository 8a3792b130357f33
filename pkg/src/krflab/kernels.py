"""Backend selection for the hot kernels.

The compiled extension is preferred; set ``KRF_BACKEND=python`` to force the
numpy/scipy fallback.
"""

import os

from . import _kernels_py

_requested = os.environ.get("KRF_BACKEND", "").lower()

if _requested == "python":
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _kernels_py

BACKEND = _impl.BACKEND
be_residual = _impl.be_residual
be_newton_direction = _impl.be_newton_direction
grid_dijkstra = _impl.grid_dijkstra


def available_backends():
    out = {"python": _kernels_py}
    try:
        from . import _ckernels
        out["compiled"] = _ckernels
    except ImportError:
        pass
    return out
