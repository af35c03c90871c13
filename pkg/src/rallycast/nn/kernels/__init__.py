"""Convolution kernel backend selection.

The compiled extension is preferred when present; the pure NumPy kernels are a
drop-in fallback.  ``RALLYCAST_CONV_BACKEND`` forces a choice: ``cython``,
``numpy`` or ``auto`` (default).  Both backends implement the same three
entry points with identical semantics; ``benchmarks/bench_kernels.py``
compares them.
"""

from __future__ import annotations

import os

from . import conv_numpy

_requested = os.environ.get("RALLYCAST_CONV_BACKEND", "auto").lower()

_ext = None
if _requested in ("auto", "cython"):
    try:
        from . import _convext as _ext  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "RALLYCAST_CONV_BACKEND=cython but the compiled extension is "
                "not built; run `pip install -e .` or use the numpy backend")
        _ext = None

if _ext is not None:
    BACKEND = "cython"
    conv2d_forward = _ext.conv2d_forward
    conv2d_backward_input = _ext.conv2d_backward_input
    conv2d_backward_weights = _ext.conv2d_backward_weights
else:
    BACKEND = "numpy"
    conv2d_forward = conv_numpy.conv2d_forward
    conv2d_backward_input = conv_numpy.conv2d_backward_input
    conv2d_backward_weights = conv_numpy.conv2d_backward_weights

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward_input",
    "conv2d_backward_weights",
    "conv_numpy",
]
