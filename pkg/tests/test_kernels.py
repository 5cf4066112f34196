from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.interpolate import RectBivariateSpline

from fuzzylab import _kernels_py, kernels

compiled = pytest.importorskip("fuzzylab._kernels", reason="compiled extension not built")


def _field(seed=1):
    rng = np.random.default_rng(seed)
    s1, s2 = np.linspace(-1, 1, 9), np.linspace(-1, 1, 8)
    vals = 0.05 * rng.normal(size=(9, 8, 27))
    tx = ty = None
    coefs = []
    for c in range(27):
        sp = RectBivariateSpline(s1, s2, vals[..., c], kx=3, ky=3, s=0)
        tx, ty = sp.get_knots()
        coefs.append(sp.get_coeffs().reshape(len(tx) - 4, len(ty) - 4))
    return s1, s2, vals, np.ascontiguousarray(tx), np.ascontiguousarray(ty), np.ascontiguousarray(np.stack(coefs))


def test_python_spline_matches_scipy():
    s1, s2, vals, tx, ty, coef = _field()
    for u, v in ((0.1, -0.3), (-1.0, 1.0), (0.77, 0.05)):
        ref = [RectBivariateSpline(s1, s2, vals[..., c], kx=3, ky=3, s=0).ev(u, v) for c in range(27)]
        np.testing.assert_allclose(_kernels_py.eval_spline(tx, ty, coef, u, v), ref, atol=1e-13)


def test_backends_agree_on_spline():
    _, _, _, tx, ty, coef = _field()
    for u, v in ((0.1, -0.3), (-0.9, 0.95), (0.5, 0.5)):
        np.testing.assert_allclose(
            np.asarray(compiled.eval_spline(tx, ty, coef, u, v)), _kernels_py.eval_spline(tx, ty, coef, u, v), atol=1e-14
        )


def test_backends_agree_on_rk4():
    _, _, _, tx, ty, coef = _field(2)
    y0 = np.array([0.0, -0.2, 0.1, 1.0, 0.4, -0.3])
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    a, na = compiled.integrate_rk4(tx, ty, coef, y0, 0.05, 60, lo, hi)
    b, nb = _kernels_py.integrate_rk4(tx, ty, coef, y0, 0.05, 60, lo, hi)
    assert na == nb
    np.testing.assert_allclose(np.asarray(a), b, atol=1e-13)


def test_dispatch_prefers_compiled():
    if not os.environ.get("FUZZYLAB_PURE_PYTHON"):
        assert kernels.BACKEND == "cython"


def test_environment_selects_python_fallback():
    env = dict(os.environ, FUZZYLAB_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from fuzzylab import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
