"""Kernel dispatch.

The Cython extension is used when it was built; otherwise the numpy fallback is
imported. Set ``FOLLOWSEL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("FOLLOWSEL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

jacobi_solve = _impl.jacobi_solve
rank1_update = _impl.rank1_update
rank2_update = _impl.rank2_update
swap_scores = _impl.swap_scores


def get(name, backend=None):
    """Return kernel ``name`` from a specific backend (``"cython"`` or ``"python"``)."""
    if backend is None:
        return getattr(_impl, name)
    if backend == "python":
        return getattr(_kernels_py, name)
    if backend == "cython":
        from . import _kernels as compiled

        return getattr(compiled, name)
    raise ValueError(f"unknown kernel backend {backend!r}")
