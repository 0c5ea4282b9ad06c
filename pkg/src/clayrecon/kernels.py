"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting the environment
variable ``CLAYRECON_PURE_PYTHON=1`` forces the NumPy implementation.
``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

if os.environ.get("CLAYRECON_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

fps_indices = _impl.fps_indices
cell_covariance = _impl.cell_covariance
rotation_sweep = _impl.rotation_sweep
data_energy = _impl.data_energy
global_rhs = _impl.global_rhs


def available_backends():
    """Mapping of backend name to kernel module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["compiled"] = _kernels
    return out
