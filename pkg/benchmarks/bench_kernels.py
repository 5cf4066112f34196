"""Compiled vs pure-Python geodesic kernels.

Runs the RK4 integrator and the spline evaluator on a synthetic smooth
Christoffel field and prints per-call timings and the speed-up.

    python3 benchmarks/bench_kernels.py [--steps 2000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from scipy.interpolate import RectBivariateSpline

from fuzzylab import _kernels_py

try:
    from fuzzylab import _kernels
except ImportError:  # extension not built
    _kernels = None


def synthetic_field(n: int = 41, channels: int = 27):
    s = np.linspace(-2.0, 2.0, n)
    u, v = np.meshgrid(s, s, indexing="ij")
    rng = np.random.default_rng(7)
    freq = rng.uniform(0.3, 1.2, size=(channels, 2))
    amp = rng.uniform(-0.05, 0.05, size=channels)
    coef = []
    tx = ty = None
    for c in range(channels):
        vals = amp[c] * np.sin(freq[c, 0] * u) * np.cos(freq[c, 1] * v)
        spl = RectBivariateSpline(s, s, vals, kx=3, ky=3, s=0)
        tx, ty = spl.get_knots()
        k = len(tx) - 4
        coef.append(spl.get_coeffs().reshape(k, len(ty) - 4))
    return np.ascontiguousarray(tx), np.ascontiguousarray(ty), np.ascontiguousarray(coef), np.array([-2.0, -2.0]), np.array([2.0, 2.0])


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    tx, ty, coef, lo, hi = synthetic_field()
    y0 = np.array([0.0, 0.1, -0.2, 1.0, 0.3, 0.2])
    h = 0.002
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    results = {}
    for name, mod in backends.items():
        steps = args.steps if name == "cython" else max(args.steps // 10, 10)
        t_rk = best_of(lambda: mod.integrate_rk4(tx, ty, coef, y0, h, steps, lo, hi), args.repeat) / steps
        pts = np.random.default_rng(0).uniform(-1.9, 1.9, size=(500, 2))
        t_ev = best_of(lambda: [mod.eval_spline(tx, ty, coef, p[0], p[1]) for p in pts], args.repeat) / len(pts)
        results[name] = (t_rk, t_ev)
        print(f"{name:7s} rk4 step {t_rk * 1e6:9.2f} us   spline eval {t_ev * 1e6:8.2f} us")
    if "cython" in results:
        traj_c, _ = _kernels.integrate_rk4(tx, ty, coef, y0, h, 200, lo, hi)
        traj_p, _ = _kernels_py.integrate_rk4(tx, ty, coef, y0, h, 200, lo, hi)
        print(f"max trajectory difference: {np.max(np.abs(np.asarray(traj_c) - np.asarray(traj_p))):.2e}")
        pr, pe = results["python"]
        cr, ce = results["cython"]
        print(f"speed-up: rk4 x{pr / cr:.0f}, spline eval x{pe / ce:.0f}")
    else:
        print("compiled kernel not available; only the fallback was timed")


if __name__ == "__main__":
    main()
