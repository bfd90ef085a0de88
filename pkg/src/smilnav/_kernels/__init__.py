"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set SMILNAV_NO_EXT=1 to force the pure-python path (used by the benchmark
and the backend-equivalence tests).
"""

import os

from . import pyfallback

if os.environ.get("SMILNAV_NO_EXT"):
    _impl = pyfallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = pyfallback

im2col = _impl.im2col
col2im = _impl.col2im
raycast = _impl.raycast
dijkstra_field = _impl.dijkstra_field


def backend():
    return "cython" if _impl is not pyfallback else "numpy"
