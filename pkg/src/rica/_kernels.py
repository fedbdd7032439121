"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``RICA_PURE_PYTHON=1`` to force the numpy path.
"""
import os

from . import _ksg_py

BACKEND = "python"
ksg_counts = _ksg_py.ksg_counts

if os.environ.get("RICA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ksg_ext import ksg_counts  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        pass

__all__ = ["BACKEND", "ksg_counts"]
