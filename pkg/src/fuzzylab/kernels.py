"""Kernel dispatch: the compiled extension when built, otherwise the numpy fallback."""

from __future__ import annotations

import os

if os.environ.get("FUZZYLAB_PURE_PYTHON"):
    from ._kernels_py import eval_spline, integrate_rk4

    BACKEND = "python"
else:
    try:
        from ._kernels import eval_spline, integrate_rk4

        BACKEND = "cython"
    except ImportError:
        from ._kernels_py import eval_spline, integrate_rk4

        BACKEND = "python"

__all__ = ["BACKEND", "eval_spline", "integrate_rk4"]
