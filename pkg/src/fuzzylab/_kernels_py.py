"""Pure-numpy versions of the compiled kernels, used when the extension is absent."""

from __future__ import annotations

import numpy as np

K = 3


def _span(t: np.ndarray, x: float) -> int:
    lo, hi = K, t.shape[0] - K - 1
    if x >= t[hi]:
        return hi - 1
    if x <= t[lo]:
        return lo
    return int(np.searchsorted(t, x, side="right")) - 1


def _basis(t: np.ndarray, l: int, x: float) -> np.ndarray:
    n = np.zeros(K + 1)
    left = np.zeros(K + 1)
    right = np.zeros(K + 1)
    n[0] = 1.0
    for j in range(1, K + 1):
        left[j] = x - t[l + 1 - j]
        right[j] = t[l + j] - x
        saved = 0.0
        for r in range(j):
            temp = n[r] / (right[r + 1] + left[j - r])
            n[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        n[j] = saved
    return n


def eval_spline(tx, ty, coef, u, v):
    lu, lv = _span(tx, u), _span(ty, v)
    bu, bv = _basis(tx, lu, u), _basis(ty, lv, v)
    block = coef[:, lu - K : lu + 1, lv - K : lv + 1]
    return np.einsum("i,cij,j->c", bu, block, bv)


def _accel(tx, ty, coef, y):
    c = eval_spline(tx, ty, coef, y[1], y[2]).reshape(3, 3, 3)
    v = y[3:]
    return np.concatenate([v, -np.einsum("abc,b,c->a", c, v, v)])


def integrate_rk4(tx, ty, coef, y0, h, nsteps, lo, hi):
    traj = np.zeros((nsteps + 1, 6))
    y = np.array(y0, dtype=float)
    traj[0] = y
    done = 0
    for n in range(nsteps):
        k1 = _accel(tx, ty, coef, y)
        k2 = _accel(tx, ty, coef, y + 0.5 * h * k1)
        k3 = _accel(tx, ty, coef, y + 0.5 * h * k2)
        k4 = _accel(tx, ty, coef, y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        traj[n + 1] = y
        done = n + 1
        if y[1] < lo[0] or y[1] > hi[0] or y[2] < lo[1] or y[2] > hi[1]:
            break
    return traj[: done + 1], done
