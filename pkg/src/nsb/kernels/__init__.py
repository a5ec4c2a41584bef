"""Hot-kernel backend selection.

The compiled Cython extension is preferred when present; the numpy
implementation is the always-available fallback. Both expose the same
five functions with identical layouts and semantics. Set
``NSB_KERNELS=numpy`` (or ``cython``) to force a backend; ``cython``
raises if the extension is not built.
"""

from __future__ import annotations

import os

from nsb.kernels import ops_np

try:
    from nsb.kernels import _opscy
except ImportError:
    _opscy = None

_choice = os.environ.get("NSB_KERNELS", "auto").lower()
if _choice == "numpy":
    _backend = ops_np
elif _choice == "cython":
    if _opscy is None:
        raise ImportError("NSB_KERNELS=cython but the compiled extension is missing")
    _backend = _opscy
elif _choice == "auto":
    _backend = _opscy if _opscy is not None else ops_np
else:
    raise ValueError(f"unknown NSB_KERNELS value {_choice!r}")

BACKEND = "cython" if _backend is _opscy and _opscy is not None else "numpy"
HAVE_COMPILED = _opscy is not None

conv2d_fwd = _backend.conv2d_fwd
conv2d_bwd_input = _backend.conv2d_bwd_input
conv2d_bwd_weights = _backend.conv2d_bwd_weights
maxpool2x2_fwd = _backend.maxpool2x2_fwd
maxpool2x2_bwd = _backend.maxpool2x2_bwd

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "conv2d_fwd",
    "conv2d_bwd_input",
    "conv2d_bwd_weights",
    "maxpool2x2_fwd",
    "maxpool2x2_bwd",
    "ops_np",
]
