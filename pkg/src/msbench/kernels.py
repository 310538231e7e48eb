"""Backend selection for the hot sparse kernels.

The compiled extension is used when it imports; otherwise, or when the
``MSBENCH_PURE_PYTHON`` environment variable is set to a non-empty value,
the pure-Python twins are used. ``get_backend`` returns a specific backend
for cross-checking and benchmarking.
"""
import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "csr_matvec",
    "csr_dense_matmul",
    "lu_factor",
    "ilut_factor",
    "lu_solve",
]


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "cython")
    return names


def get_backend(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("MSBENCH_PURE_PYTHON") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = get_backend(BACKEND)

csr_matvec = _impl.csr_matvec
csr_dense_matmul = _impl.csr_dense_matmul
lu_factor = _impl.lu_factor
ilut_factor = _impl.ilut_factor
lu_solve = _impl.lu_solve
