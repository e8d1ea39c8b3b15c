"""Hot kernels: pairwise product-manifold distances and row-wise top-k.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is selected at import time. Setting
``PROJGRAPH_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels

KIND_CODES = {"E": 0, "H": 1, "S": 2, "P": 3, "D": 4}

_compiled = None
if not os.environ.get("PROJGRAPH_PURE_PYTHON"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"

pairwise_forward = _impl.pairwise_forward
pairwise_backward = _impl.pairwise_backward
topk_rows = _impl.topk_rows


def backends():
    """Available implementations keyed by name (the fallback is always present)."""
    found = {"python": _pykernels}
    if _compiled is not None:
        found["cython"] = _compiled
    return found
