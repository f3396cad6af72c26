"""Rollout kernels with an optional compiled fast path.

The compiled extension is built at install time when Cython and a C
compiler are present; otherwise the numpy implementation is used. Setting
POLYREACH_PURE_PYTHON=1 forces the numpy path regardless.
"""
import os

if os.environ.get("POLYREACH_PURE_PYTHON"):
    from . import _ref as backend
else:
    try:
        from . import _fast as backend
    except ImportError:
        from . import _ref as backend

NAME = backend.NAME
rollout_batch = backend.rollout_batch

# outcome codes shared by every backend
REACHED, LEFT_X, TIMEOUT = 0, 1, 2
