"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set ``XDQN_PURE_KERNELS=1`` to force the fallback (used by the benchmark to
compare both paths).
"""
import os

from . import pure

if os.environ.get("XDQN_PURE_KERNELS", "") not in ("", "0"):
    _impl = pure
    HAVE_NATIVE = False
else:
    try:
        from . import _native as _impl
        HAVE_NATIVE = True
    except ImportError:
        _impl = pure
        HAVE_NATIVE = False

BACKEND = "native" if HAVE_NATIVE else "pure"

best_split = _impl.best_split
tree_apply = _impl.tree_apply
forest_apply = _impl.forest_apply
sumtree_set = _impl.sumtree_set
sumtree_find = _impl.sumtree_find
