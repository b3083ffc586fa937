"""Backend selection for the hot kernels.

The compiled extension is used when importable; set
``GREEDYAPPROX_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from greedyapprox import _pykernels

if os.environ.get("GREEDYAPPROX_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from greedyapprox import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

argmax_abs_correlation = _impl.argmax_abs_correlation
orthogonalize = _impl.orthogonalize
subset_sq_errors = _impl.subset_sq_errors


def available_backends():
    """Return the importable kernel modules keyed by name."""
    out = {"python": _pykernels}
    try:
        from greedyapprox import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
