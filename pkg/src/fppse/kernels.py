"""Kernel backend selection.

The Cython extension is used when it was built; set ``FPPSE_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("FPPSE_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

BACKENDS = {"python": _kernels_py}
if BACKEND == "cython":
    BACKENDS["cython"] = _impl


def quad_eval(indptr, indices, data, owner, u, m, scale=2.0, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.quad_eval(indptr, indices, data, owner, u, m, scale)


def gram(indptr, indices, data, row_weight, n, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.gram(indptr, indices, data, row_weight, n)
