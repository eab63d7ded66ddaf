"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is loaded. Setting the environment
variable ``ROVERANN_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

if os.environ.get("ROVERANN_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

forward = _impl.forward
backprop = _impl.backprop
max_abs_errors = _impl.max_abs_errors
train_epoch = _impl.train_epoch

SIGMOID = _pykernels.SIGMOID
LINEAR = _pykernels.LINEAR
