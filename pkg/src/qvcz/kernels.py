"""Hot-kernel dispatch: the compiled ``_core`` extension when built, else numpy.

Set ``QVCZ_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("QVCZ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

two_mode_pnd = _impl.two_mode_pnd
poisson_mixture_accumulate = _impl.poisson_mixture_accumulate
poisson_table = _kernels_py.poisson_table

__all__ = ["BACKEND", "two_mode_pnd", "poisson_mixture_accumulate", "poisson_table"]
