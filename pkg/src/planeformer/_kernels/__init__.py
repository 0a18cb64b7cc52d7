"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it was built and ``PLANEFORMER_PURE`` is
unset; ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels as pure

compiled = None
if not os.environ.get("PLANEFORMER_PURE"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "python"

linear_sum_assignment = _impl.linear_sum_assignment
nearest_assign = _impl.nearest_assign
contingency = _impl.contingency

__all__ = ["BACKEND", "compiled", "pure", "linear_sum_assignment", "nearest_assign", "contingency"]
