"""Eigenmanifold charts, the induced metric and the quantum geometric tensor.

A chart is a rectangular grid of parameters ``s = (s1, s2)`` together with the
embedded points ``x(s)`` of the eigenmanifold and their quasicoherent states in
a smooth gauge.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize

from .opcore import SIGMA, FuzzySpace, ModelTag
from .qcstate import (
    QcState,
    align_phase,
    apply_dirac,
    fix_gauge,
    local_data,
    reference_spinor,
    solve_qc,
    sphere_angles,
)

TOL_MEM = 1e-6
NEWTON_TOL = 1e-13
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAXITER = 100
MIN_NEIGHBOUR_OVERLAP = 0.9


class ChartError(ValueError):
    """Raised when a chart cannot be traced or is unsuitable for a computation."""


class ChartTag(str, enum.Enum):
    PLANE_COMPLEX = "PlaneComplex"
    SPHERE_ANGLES = "SphereAngles"
    CUSTOM = "Custom"
    ISOLATED = "Isolated"


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Parameter grid of a chart.

    ``base`` is only used by ``Custom`` charts: it maps ``(s1, s2)`` to a first
    guess of the embedded point, which is then pushed onto the eigenmanifold
    along the local normal.
    """

    s1: np.ndarray
    s2: np.ndarray
    tag: ChartTag
    base: Callable[[float, float], np.ndarray] | None = None

    def __post_init__(self):
        object.__setattr__(self, "s1", np.asarray(self.s1, dtype=float))
        object.__setattr__(self, "s2", np.asarray(self.s2, dtype=float))
        object.__setattr__(self, "tag", ChartTag(self.tag))
        for s in (self.s1, self.s2):
            if s.ndim != 1 or s.size < 3:
                raise ChartError("each chart axis needs at least 3 nodes")
            if not np.allclose(np.diff(s), s[1] - s[0], rtol=1e-9, atol=1e-12):
                raise ChartError("chart axes must be uniformly spaced")
        if self.tag is ChartTag.CUSTOM and self.base is None:
            raise ChartError("Custom charts need a base parametrisation")

    @classmethod
    def regular(cls, tag, s1_range, s2_range, n1: int = 41, n2: int = 41, base=None) -> "GridSpec":
        return cls(np.linspace(*s1_range, n1), np.linspace(*s2_range, n2), ChartTag(tag), base)

    @classmethod
    def centred(cls, tag, centre, h: float = 0.1, n: int = 41) -> "GridSpec":
        half = 0.5 * h * (n - 1)
        return cls.regular(tag, (centre[0] - half, centre[0] + half), (centre[1] - half, centre[1] + half), n, n)

    @property
    def h1(self) -> float:
        return float(self.s1[1] - self.s1[0])

    @property
    def h2(self) -> float:
        return float(self.s2[1] - self.s2[0])

    def refined(self) -> "GridSpec":
        return GridSpec(
            np.linspace(self.s1[0], self.s1[-1], 2 * self.s1.size - 1),
            np.linspace(self.s2[0], self.s2[-1], 2 * self.s2.size - 1),
            self.tag,
            self.base,
        )


def default_grid(fs: FuzzySpace, seed) -> GridSpec:
    """41 x 41 grid with spacing 0.1 around the seed, in the model's natural chart."""
    seed = np.asarray(seed, dtype=float)
    if fs.is_plane_family:
        return GridSpec.centred(ChartTag.PLANE_COMPLEX, seed[:2])
    if fs.model_tag is ModelTag.FUZZY_SPHERE:
        theta, phi = sphere_angles(seed)
        n_theta = int(np.floor((np.pi - 0.2) / 0.1)) + 1
        thetas = 0.1 + 0.1 * np.arange(n_theta)
        return GridSpec(thetas, phi + 0.1 * np.arange(-20, 21), ChartTag.SPHERE_ANGLES)
    raise ChartError(f"no default chart for model {fs.model_tag.value}; pass a Custom GridSpec")


@dataclass(frozen=True, eq=False)
class SurfaceChart:
    """Traced chart: embedding ``x(s)`` and gauge-aligned states on the grid."""

    fs: FuzzySpace
    grid: GridSpec
    embedding: np.ndarray
    states: np.ndarray
    lambda0: np.ndarray
    gap: np.ndarray
    fixed_point_residual: np.ndarray
    refined: bool = False

    @property
    def tag(self) -> ChartTag:
        return self.grid.tag

    @property
    def s1(self) -> np.ndarray:
        return self.grid.s1

    @property
    def s2(self) -> np.ndarray:
        return self.grid.s2

    @property
    def h1(self) -> float:
        return self.grid.h1

    @property
    def h2(self) -> float:
        return self.grid.h2

    @property
    def shape(self) -> tuple[int, int]:
        return self.embedding.shape[:2]

    def qc(self, i: int, j: int) -> QcState:
        """Full quasicoherent data at node ``(i, j)``, phase-matched to the cache."""
        return solve_qc(self.fs, self.embedding[i, j], previous=self.states[i, j])

    def neighbour_overlaps(self) -> tuple[np.ndarray, np.ndarray]:
        """``<Lambda(s)|Lambda(s')>`` between consecutive nodes along each axis."""
        st = self.states
        along1 = np.einsum("ijk,ijk->ij", st[:-1].conj(), st[1:])
        along2 = np.einsum("ijk,ijk->ij", st[:, :-1].conj(), st[:, 1:])
        return along1, along2

    def with_phases(self, phases: np.ndarray) -> "SurfaceChart":
        """Same chart with every cached state multiplied by ``exp(i phases)``."""
        return replace(self, states=self.states * np.exp(1j * np.asarray(phases))[..., None])

    def gauge_is_smooth(self) -> bool:
        a, b = self.neighbour_overlaps()
        return bool(np.all(a.real > 0) and np.all(b.real > 0))


def _node_direction(tag: ChartTag, s: tuple[float, float]) -> np.ndarray | None:
    if tag is ChartTag.PLANE_COMPLEX:
        return np.array([0.0, 0.0, 1.0])
    if tag is ChartTag.SPHERE_ANGLES:
        th, ph = s
        return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    return None


def line_root(
    fs: FuzzySpace,
    x0,
    direction,
    previous: np.ndarray | None = None,
    *,
    tol: float = NEWTON_TOL,
    radius: float = 2.0,
    max_iter: int = 50,
) -> QcState:
    """Zero of the tracked signed near-null eigenvalue on the line ``x0 + t d``.

    Newton steps use the exact slope ``d lambda0 / dt = -n . d``.  When they
    stall or leave the search radius the root is bracketed on a scan of
    ``[-radius, radius]`` and refined with Brent's method.
    """
    x0 = np.asarray(x0, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    t, prev = 0.0, previous
    best = None
    for _ in range(max_iter):
        qc = solve_qc(fs, x0 + t * d, previous=prev, fast=True)
        if best is None or abs(qc.lambda0) < abs(best.lambda0):
            best = qc
        if abs(qc.lambda0) <= tol:
            return qc
        slope = -float(local_data(fs, qc).n_vec @ d)
        if abs(slope) < 1e-10:
            break
        step = -qc.lambda0 / slope
        if abs(t + step) > radius:
            break
        t, prev = t + step, qc.amps
        if abs(step) < 1e-15:
            return qc
    if best is not None and abs(best.lambda0) <= TOL_MEM * 1e-3:
        return best

    anchor = previous

    def lam(tt):
        nonlocal anchor
        q = solve_qc(fs, x0 + tt * d, previous=anchor, fast=True)
        anchor = q.amps
        return q.lambda0

    grid = np.concatenate([[0.0], np.ravel(np.column_stack([np.arange(1, 41), -np.arange(1, 41)])) * radius / 40])
    vals = {}
    for tt in grid:
        vals[tt] = lam(tt)
    ts = np.sort(grid)
    for a, b in zip(ts[:-1], ts[1:]):
        if np.sign(vals[a]) != np.sign(vals[b]):
            root = brentq(lam, a, b, xtol=1e-15)
            return solve_qc(fs, x0 + root * d, previous=previous, fast=True)
    raise ChartError(f"root bracket not found within search radius {radius} around {x0}")


def _fixed_point_x3(fs: FuzzySpace, s, x3: float, previous) -> tuple[QcState, float]:
    """Damped self-consistency ``x3 <- <X^3>`` at fixed ``(x1, x2) = s``."""
    x3_op = fs.x(2)
    qc = None
    for _ in range(FIXED_POINT_MAXITER):
        qc = solve_qc(fs, [s[0], s[1], x3], previous=previous, fast=True)
        b = qc.amps.reshape(2, -1)
        mean = float(np.real(np.vdot(b, b @ x3_op.T)))
        delta = mean - x3
        if abs(delta) < FIXED_POINT_TOL:
            return qc, delta
        x3 += 0.5 * delta
        previous = qc.amps
    raise ChartError(f"fixed point for x3 failed to converge in {FIXED_POINT_MAXITER} iterations at s={tuple(s)}")


def _mean_x3(fs: FuzzySpace, qc: QcState) -> float:
    b = qc.amps.reshape(2, -1)
    return float(np.real(np.vdot(b, b @ fs.x(2).T)))


def _isolated_points(fs: FuzzySpace, seed, tol_mem: float) -> SurfaceChart:
    n = fs.hilbert_dim
    pts, states, lams, gaps = [], [], [], []
    eps = float(fs.params.get("epsilon", 0.0))
    for q in range(n):
        ang = 2 * np.pi * q / n
        x = np.array([np.cos(ang), np.sin(ang), eps * (n - 1) / 2])
        qc = solve_qc(fs, x)
        if abs(qc.lambda0) > tol_mem:
            res = minimize(lambda y: abs(solve_qc(fs, y).lambda0), x, method="Nelder-Mead",
                           options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
            qc = solve_qc(fs, res.x)
        pts.append(qc.x)
        states.append(qc.amps)
        lams.append(qc.lambda0)
        gaps.append(qc.gap)
    grid = GridSpec(np.arange(n, dtype=float), np.arange(3, dtype=float), ChartTag.ISOLATED)
    return SurfaceChart(
        fs=fs,
        grid=grid,
        embedding=np.array(pts)[:, None, :],
        states=np.array(states)[:, None, :],
        lambda0=np.array(lams)[:, None],
        gap=np.array(gaps)[:, None],
        fixed_point_residual=np.zeros((n, 1)),
    )


def trace_eigenmanifold(
    fs: FuzzySpace,
    seed,
    grid_spec: GridSpec | None = None,
    *,
    tol_mem: float = TOL_MEM,
    gauge: str = "reference",
    refine: bool = True,
) -> SurfaceChart:
    """Trace the eigenmanifold through ``seed`` on a parameter grid.

    Plane-family nodes sit at ``(s1, s2, x3)`` with ``x3`` self-consistent,
    ``x3 = <X^3>``; it is located as the zero of the tracked near-null eigenvalue
    along the vertical, and the damped fixed-point iteration takes over whenever
    that zero does not satisfy the self-consistency.  Sphere nodes are found
    along the radial ray at fixed angles, Custom nodes along the normal at the
    base guess.  On the fuzzy circle the eigenmanifold is a finite set of
    points and an ``Isolated`` chart listing them is returned.

    ``gauge="reference"`` fixes each phase against the model reference spinor;
    ``"sequential"`` aligns every node to its already traced neighbour.  With
    ``refine`` the grid is traced once more at doubled resolution if
    neighbouring states overlap by less than 0.9.
    """
    seed = np.asarray(seed, dtype=float)
    seed_qc = solve_qc(fs, seed)
    if abs(seed_qc.lambda0) > tol_mem:
        raise ChartError(f"seed {seed} is not on the eigenmanifold (|lambda0| = {abs(seed_qc.lambda0):.3e})")
    if fs.model_tag is ModelTag.FUZZY_CIRCLE:
        return _isolated_points(fs, seed, tol_mem)
    grid = grid_spec if grid_spec is not None else default_grid(fs, seed)
    if grid.tag is ChartTag.PLANE_COMPLEX and not fs.is_plane_family:
        raise ChartError("PlaneComplex charts need a plane-family model")
    use_ref = gauge == "reference" and reference_spinor(fs, seed) is not None
    if gauge not in ("reference", "sequential"):
        raise ValueError(f"unknown gauge rule {gauge!r}")

    n1, n2 = grid.s1.size, grid.s2.size
    dim = 2 * fs.hilbert_dim
    emb = np.zeros((n1, n2, 3))
    states = np.zeros((n1, n2, dim), dtype=complex)
    lam = np.zeros((n1, n2))
    gap = np.zeros((n1, n2))
    fpres = np.zeros((n1, n2))
    scale = max(np.linalg.norm(seed), 1.0)

    start = _start_node(grid, seed)
    for i, j, parent in _trace_order(grid, start):
        s = (grid.s1[i], grid.s2[j])
        if parent is None:
            guess_x, prev = seed, None
        else:
            guess_x, prev = emb[parent], states[parent]
        if grid.tag is ChartTag.PLANE_COMPLEX:
            start_x = np.array([s[0], s[1], guess_x[2]])
            qc = line_root(fs, start_x, _node_direction(grid.tag, s), prev, radius=2.0 * scale)
            res = _mean_x3(fs, qc) - qc.x[2]
            if abs(res) > 1e-8:
                qc, res = _fixed_point_x3(fs, s, qc.x[2], qc.amps)
        elif grid.tag is ChartTag.SPHERE_ANGLES:
            u = _node_direction(grid.tag, s)
            qc = line_root(fs, np.linalg.norm(guess_x) * u, u, prev, radius=np.linalg.norm(guess_x))
            res = 0.0
        else:
            base = np.asarray(grid.base(*s), dtype=float)
            q0 = solve_qc(fs, base, previous=prev, fast=True)
            normal = local_data(fs, q0).n_vec
            if np.linalg.norm(normal) < 1e-8:
                raise ChartError(f"vanishing normal at s={s}; the eigenmanifold pinches here")
            qc = line_root(fs, base, normal, prev, radius=2.0 * scale)
            res = 0.0
        vec = qc.amps
        if use_ref:
            vec = fix_gauge(vec, reference_spinor(fs, qc.x))
        elif parent is not None:
            vec = align_phase(vec, states[parent])
        else:
            vec = fix_gauge(vec, None)
        if abs(qc.lambda0) > tol_mem:
            raise ChartError(f"node s={s} misses the eigenmanifold (|lambda0| = {abs(qc.lambda0):.3e})")
        emb[i, j] = qc.x
        states[i, j] = vec
        lam[i, j] = qc.lambda0
        gap[i, j] = qc.gap
        fpres[i, j] = res

    chart = SurfaceChart(fs, grid, emb, states, lam, gap, fpres)
    if refine and _min_overlap(chart) < MIN_NEIGHBOUR_OVERLAP:
        finer = trace_eigenmanifold(fs, seed, grid.refined(), tol_mem=tol_mem, gauge=gauge, refine=False)
        return replace(finer, refined=True)
    return chart


def _start_node(grid: GridSpec, seed: np.ndarray) -> tuple[int, int]:
    if grid.tag is ChartTag.PLANE_COMPLEX:
        p = seed[:2]
    elif grid.tag is ChartTag.SPHERE_ANGLES:
        p = np.array(sphere_angles(seed))
    else:
        return 0, 0
    return int(np.argmin(np.abs(grid.s1 - p[0]))), int(np.argmin(np.abs(grid.s2 - p[1])))


def _trace_order(grid: GridSpec, start: tuple[int, int]):
    """Nodes spreading out from ``start``: its row first, then row by row.

    Yields ``(i, j, parent)`` where ``parent`` is an already visited neighbour.
    """
    n1, n2 = grid.s1.size, grid.s2.size
    i0, j0 = start
    yield i0, j0, None
    for j in list(range(j0 + 1, n2)) + list(range(j0 - 1, -1, -1)):
        yield i0, j, (i0, j - 1 if j > j0 else j + 1)
    for i in list(range(i0 + 1, n1)) + list(range(i0 - 1, -1, -1)):
        pi = i - 1 if i > i0 else i + 1
        for j in range(n2):
            yield i, j, (pi, j)


def _min_overlap(chart: SurfaceChart) -> float:
    a, b = chart.neighbour_overlaps()
    return float(min(np.min(np.abs(a)), np.min(np.abs(b))))


@dataclass(frozen=True, eq=False)
class MetricField:
    """Per-node geometry of a chart.

    ``triads[i, j, k, a] = dx^k/ds^a``.  ``qgt`` is built from the exact state
    derivative ``D_x dLambda/ds^a = (1 - P) sigma_k e^k_a Lambda``; ``qgt_fd`` is
    the same tensor from phase-aligned state differences.  ``purity_form`` is
    ``Im qgt_12`` per unit coordinate area, ``Im qgt_12 / sqrt(det gamma)``.
    """

    chart: SurfaceChart
    triads: np.ndarray
    gamma: np.ndarray
    qgt: np.ndarray
    qgt_fd: np.ndarray
    purity_form: np.ndarray

    @property
    def gamma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.gamma)

    @property
    def sqrt_det(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.gamma))


_EDGE_STENCILS = (
    (-137, 300, -300, 200, -75, 12),
    (-12, -65, 120, -60, 20, -3),
)


def grid_derivative(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order finite difference along ``axis``.

    Five-point central stencil inside, one-sided stencils on the
    two outermost nodes of each side (six-point, fifth order, so the edges are
    no less accurate than the interior).  Axes shorter than six nodes fall back
    to second order.
    """
    v = np.moveaxis(np.asarray(values), axis, 0)
    n = v.shape[0]
    if n < 6:
        return np.gradient(values, h, axis=axis, edge_order=2)
    out = np.empty_like(v, dtype=np.result_type(v, float))
    out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    for k, row in enumerate(_EDGE_STENCILS):
        out[k] = sum(c * v[m] for m, c in enumerate(row)) / (60 * h)
        out[-1 - k] = -sum(c * v[-1 - m] for m, c in enumerate(row)) / (60 * h)
    return np.moveaxis(out, 0, axis)


def aligned_state_derivative(states: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Phase-aligned second-order difference of a grid of states along ``axis``.

    Each neighbour is multiplied by the unit phase that makes its overlap with
    the centre node real positive before differencing.
    """
    st = np.moveaxis(states, axis, 0)
    n = st.shape[0]

    def shifted(k):
        idx = np.clip(np.arange(n) + k, 0, n - 1)
        nb = st[idx]
        ov = np.einsum("...k,...k->...", st.conj(), nb)
        ph = np.where(np.abs(ov) > 0, np.abs(ov) / np.where(ov == 0, 1, ov), 1.0)
        return nb * ph[..., None]

    p1, m1 = shifted(1), shifted(-1)
    out = (p1 - m1) / (2 * h)
    out[0] = (-3 * st[0] + 4 * p1[0] - shifted(2)[0]) / (2 * h)
    out[-1] = (3 * st[-1] - 4 * m1[-1] + shifted(-2)[-1]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def metric_field(fs: FuzzySpace, chart: SurfaceChart) -> MetricField:
    """Triads, induced metric, quantum geometric tensor and purity form."""
    if chart.tag is ChartTag.ISOLATED:
        raise ChartError("the eigenmanifold is a discrete set of points here; no metric is defined")
    worst = _min_overlap(chart)
    if worst < MIN_NEIGHBOUR_OVERLAP:
        raise ChartError(
            f"grid too coarse: neighbouring states overlap by {worst:.3f} < {MIN_NEIGHBOUR_OVERLAP}"
        )
    emb, st = chart.embedding, chart.states
    e1 = grid_derivative(emb, chart.h1, 0)
    e2 = grid_derivative(emb, chart.h2, 1)
    triads = np.stack([e1, e2], axis=-1)
    gamma = np.einsum("ijka,ijkb->ijab", triads, triads)
    gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))

    shape = st.shape[:-1]
    tau = []
    for a in range(2):
        sig = np.einsum("ijk,kst->ijst", triads[..., a], np.array(SIGMA))
        blocks = st.reshape(shape + (2, -1))
        v = np.einsum("ijst,ijtn->ijsn", sig, blocks).reshape(st.shape)
        v = v - np.einsum("ijk,ijk->ij", st.conj(), v)[..., None] * st
        tau.append(v)
    qgt = np.empty(shape + (2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            qgt[..., a, b] = np.einsum("ijk,ijk->ij", tau[a].conj(), tau[b])

    dstate = [aligned_state_derivative(st, chart.h1, 0), aligned_state_derivative(st, chart.h2, 1)]
    ddir = [apply_dirac(fs, emb, d) for d in dstate]
    qgt_fd = np.empty_like(qgt)
    for a in range(2):
        for b in range(2):
            qgt_fd[..., a, b] = np.einsum("ijk,ijk->ij", ddir[a].conj(), ddir[b])

    det = np.linalg.det(gamma)
    if np.any(det <= 0):
        raise ChartError("degenerate chart: the induced metric is singular at some node")
    purity = qgt[..., 0, 1].imag / np.sqrt(det)
    return MetricField(chart, triads, gamma, qgt, qgt_fd, purity)


def spacetime_interval(gamma, A, ds, dt: float, A0: float = 0.0) -> float:
    """``dtau^2 = (1 + A0)^2 dt^2 - gamma_ab w^a w^b`` with ``w = gamma^{-1} A dt + ds``.

    ``gamma^{-1} A`` is the shift vector of the foliation and ``1 + A0`` its
    lapse (``A0 = 0`` for static fuzzy spaces).
    """
    gamma = np.asarray(gamma, dtype=float)
    det = float(np.linalg.det(gamma))
    if abs(det) <= 1e-14 * max(float(np.max(np.abs(gamma))), 1.0) ** 2:
        raise ChartError("singular spatial metric")
    shift = np.linalg.solve(gamma, np.asarray(A, dtype=float))
    w = shift * dt + np.asarray(ds, dtype=float)
    return float((1.0 + A0) ** 2 * dt * dt - w @ gamma @ w)
