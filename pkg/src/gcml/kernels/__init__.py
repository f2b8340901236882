"""Convolution kernel backend selection.

Tries the compiled extension first and falls back to the pure-numpy
implementation. Force a backend with GCML_KERNELS=pure or
GCML_KERNELS=compiled (the latter raises if the extension is missing).
"""

import os

from . import pure

_forced = os.environ.get("GCML_KERNELS", "").strip().lower()

if _forced == "pure":
    _impl = pure
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _forced == "compiled":
            raise
        _impl = pure

BACKEND = "pure" if _impl is pure else "compiled"

conv2d_forward = _impl.conv2d_forward
conv2d_grad_weight = _impl.conv2d_grad_weight
conv2d_grad_input = _impl.conv2d_grad_input
