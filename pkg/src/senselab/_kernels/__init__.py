"""Kernel backend selection.

Two interchangeable backends implement the hot numerical kernels (Jacobi
eigendecomposition / SVD sweeps and the Givens angle codec): a compiled
Cython extension and a pure-Python reference.  The environment variable
SENSELAB_KERNELS picks one:

    auto      compiled if importable, else the fallback (default)
    compiled  require the extension, fail otherwise
    pure      force the pure-Python reference

`benchmarks/bench_kernels.py` compares the two.
"""

import os

from senselab.errors import ConfigurationError

from . import _fallback
from ._common import givens_angle_count

_REQUESTED = os.environ.get("SENSELAB_KERNELS", "auto").strip().lower()
if _REQUESTED not in {"auto", "compiled", "pure"}:
    raise ConfigurationError(
        f"SENSELAB_KERNELS must be one of auto/compiled/pure, got {_REQUESTED!r}"
    )

_impl = None
if _REQUESTED in ("auto", "compiled"):
    try:
        from . import _core as _impl
    except ImportError:
        if _REQUESTED == "compiled":
            raise ConfigurationError(
                "SENSELAB_KERNELS=compiled but the extension is not built"
            ) from None
if _impl is None:
    _impl = _fallback

BACKEND = "compiled" if _impl is not _fallback else "pure"

eigh = _impl.eigh
eigh_batch = _impl.eigh_batch
svd = _impl.svd
svd_batch = _impl.svd_batch
givens_decompose = _impl.givens_decompose
givens_decompose_batch = _impl.givens_decompose_batch
givens_reconstruct = _impl.givens_reconstruct
givens_reconstruct_batch = _impl.givens_reconstruct_batch

__all__ = [
    "BACKEND",
    "eigh",
    "eigh_batch",
    "svd",
    "svd_batch",
    "givens_decompose",
    "givens_decompose_batch",
    "givens_reconstruct",
    "givens_reconstruct_batch",
    "givens_angle_count",
]
