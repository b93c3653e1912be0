"""Integration kernels: compiled extension when available, NumPy otherwise.

Set ``CCSUSY_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
rk4_matrix = _kernels_py.rk4_matrix
numerov_matrix = _kernels_py.numerov_matrix

if not os.environ.get("CCSUSY_PURE_PYTHON"):
    try:
        from . import _kernels_ext
    except ImportError:
        _kernels_ext = None
    else:
        rk4_matrix = _kernels_ext.rk4_matrix
        numerov_matrix = _kernels_ext.numerov_matrix
        BACKEND = "cython"


def backends():
    """Mapping of available backend name to ``(rk4_matrix, numerov_matrix)``."""
    out = {"python": (_kernels_py.rk4_matrix, _kernels_py.numerov_matrix)}
    try:
        from . import _kernels_ext as ext
    except ImportError:
        return out
    out["cython"] = (ext.rk4_matrix, ext.numerov_matrix)
    return out
