"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; setting
``CUTPREDICT_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("CUTPREDICT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

build_tree = _impl.build_tree
predict_tree = _impl.predict_tree
lcs_length = _impl.lcs_length

__all__ = ["BACKEND", "build_tree", "predict_tree", "lcs_length"]
