"""Backend selection for the inner loops.

The compiled ``ocpdl._kernels`` module is used when it was built; otherwise
the numpy fallback in ``ocpdl._kernels_py`` is used.  Setting the environment
variable ``OCPDL_PURE_PYTHON=1`` forces the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("OCPDL_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def pgd_code(G, P, C0, lam, eta, cmax, tol, max_iters, backend=None):
    impl = _kernels_py if backend == "python" else _impl
    return impl.pgd_code(_c(G), _c(P), C0, float(lam), float(eta), float(cmax),
                         float(tol), int(max_iters))


def cyclic_columns(U0, A, B, umax, tol, max_iters, backend=None):
    impl = _kernels_py if backend == "python" else _impl
    return impl.cyclic_columns(U0, _c(A), _c(B), float(umax), float(tol), int(max_iters))
