"""Backend selection for the numerical kernels.

The compiled Cython module is used when it imports; otherwise the numpy
fallback is used. Setting ``MULTISEL_BACKEND=python`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("MULTISEL_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

bspline_basis = _impl.bspline_basis
elementary_symmetric_rows = _impl.elementary_symmetric_rows

__all__ = ["BACKEND", "bspline_basis", "elementary_symmetric_rows"]
