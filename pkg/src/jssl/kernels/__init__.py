"""Hot numeric kernels.

Two interchangeable implementations live side by side: ``_numba`` (loop
kernels compiled with ``numba.njit``) and ``_numpy`` (vectorised numpy).
The numba path is used when numba imports and the environment variable
``JSSL_BACKEND`` is not set to ``numpy``.
"""
import os

from . import _numpy

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

BACKEND = "numba" if (_numba is not None and os.environ.get("JSSL_BACKEND", "numba") != "numpy") else "numpy"
_impl = _numba if BACKEND == "numba" else _numpy

brier_step = _impl.brier_step
grow_forest = _impl.grow_forest
forest_apply = _impl.forest_apply
forest_increments = _impl.forest_increments
weibull_occupation = _impl.weibull_occupation
weibull_brier = _impl.weibull_brier
step_cif = _impl.step_cif


def get_backend(name):
    """Return the kernel module for ``'numba'`` or ``'numpy'``."""
    if name == "numba":
        if _numba is None:
            raise ImportError("numba is not available")
        return _numba
    if name == "numpy":
        return _numpy
    raise ValueError(f"unknown backend {name!r}")
