"""Hot per-particle kernels with an import-time backend choice.

The compiled Cython extension is used when it was built; otherwise the numpy
reference implementation is loaded. Set ``DPFFD_BACKEND`` to ``python`` to
force the fallback or to ``compiled`` to fail loudly when the extension is
missing.
"""
import os

from . import _reference

_choice = os.environ.get("DPFFD_BACKEND", "auto").lower()

if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"DPFFD_BACKEND must be auto, python or compiled, got {_choice!r}")

_impl = _reference
if _choice != "python":
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _reference

BACKEND = _impl.BACKEND
tank_healthy_step = _impl.tank_healthy_step
gaussian_loglik = _impl.gaussian_loglik
systematic_indices = _impl.systematic_indices
snap_binary = _impl.snap_binary


def compiled_available():
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True


__all__ = [
    "BACKEND",
    "compiled_available",
    "gaussian_loglik",
    "snap_binary",
    "systematic_indices",
    "tank_healthy_step",
]
