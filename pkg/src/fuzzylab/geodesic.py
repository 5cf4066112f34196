"""Geodesic families on eigenmanifold charts and their conservation checks.

Every family is integrated as a second-order system over ``(t, s1, s2)``,

    y''^alpha = -C^alpha_{beta gamma}(s) y'^beta y'^gamma,

with a family-specific table ``C`` of connection coefficients: the induced
Christoffels for length-minimising paths, plus the Berry contorsion for
strongly adiabatic paths, plus the full contorsion for weakly adiabatic ones.
Node values of ``C`` are interpolated by tensor-product cubic B-splines so the
right-hand side is smooth and RK4 keeps its fourth order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.linalg import expm
from scipy.optimize import brentq

from . import kernels
from .connect import ConnectionField
from .displace import build_displacement, quantum_distance
from .manifold import ChartError, ChartTag, MetricField, SurfaceChart, _node_direction, grid_derivative, line_root
from .opcore import SIGMA, FuzzySpace
from .qcstate import QcState, local_data, solve_qc

FIT_RESIDUAL_MAX = 1e-4
SELF_ADJOINT_TOL = 1e-8


class Family(str, enum.Enum):
    GMLM = "GMLM"
    GMAL = "GMAL"
    SAAG = "SAAG"
    WAAG = "WAAG"
    # spatial autoparallels of the Lorentz connection, used by the covariant conservation check
    AUTOPARALLEL = "Autoparallel"


class GeodesicError(ValueError):
    pass


class SplineField:
    """Cubic interpolant of a node field ``values[i, j, ...]`` over a chart grid."""

    def __init__(self, s1: np.ndarray, s2: np.ndarray, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        self.tail = values.shape[2:]
        flat = values.reshape(values.shape[:2] + (-1,))
        k1, k2 = min(3, len(s1) - 1), min(3, len(s2) - 1)
        if k1 < 3 or k2 < 3:
            raise ChartError("cubic interpolation needs at least four nodes per axis")
        coefs = []
        for c in range(flat.shape[-1]):
            sp = RectBivariateSpline(s1, s2, flat[..., c], kx=3, ky=3, s=0)
            tx, ty = sp.get_knots()
            coefs.append(sp.get_coeffs().reshape(len(tx) - 4, len(ty) - 4))
        self.tx = np.ascontiguousarray(tx)
        self.ty = np.ascontiguousarray(ty)
        self.coef = np.ascontiguousarray(np.stack(coefs))
        self.lo = np.array([s1[0], s2[0]])
        self.hi = np.array([s1[-1], s2[-1]])

    def __call__(self, s) -> np.ndarray:
        out = kernels.eval_spline(self.tx, self.ty, self.coef, float(s[0]), float(s[1]))
        return np.asarray(out).reshape(self.tail)

    def along(self, s_path: np.ndarray) -> np.ndarray:
        return np.array([self(s) for s in s_path])


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """Sampled path: parameter ``t``, chart point ``s``, velocity ``sdot``, embedded ``x``.

    ``tdot`` is the coordinate-time rate (``q`` for adiabatic families).  For
    GMAL the samples are the polyline vertices and ``extras["smooth"]`` holds
    the smooth geodesic of the fitted metric.
    """

    family: Family
    t: np.ndarray
    s: np.ndarray
    sdot: np.ndarray
    x: np.ndarray
    q: float | None
    diagnostics: dict[str, np.ndarray]
    exited: bool = False
    tdot: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def samples(self) -> list[tuple[float, np.ndarray, np.ndarray, np.ndarray]]:
        return [(float(self.t[k]), self.s[k], self.sdot[k], self.x[k]) for k in range(len(self.t))]

    def rows(self) -> np.ndarray:
        """``t, s1, s2, sdot1, sdot2, x1, x2, x3, speed, p1, p2, p3`` per sample."""
        n = len(self.t)
        p = self.diagnostics.get("momentum", np.full((n, 3), np.nan))
        return np.column_stack([self.t, self.s, self.sdot, self.x, self.diagnostics["speed"], p])


# -- connection tables ---------------------------------------------------------


def induced_christoffels(metric: MetricField) -> np.ndarray:
    """``G[..., a, b, c] = e^a_i d^2 x^i / ds^b ds^c`` from fourth-order differences of the triads."""
    chart = metric.chart
    tri = metric.triads  # [..., i, c]
    d2 = np.stack([grid_derivative(tri, chart.h1, 0), grid_derivative(tri, chart.h2, 1)], axis=-1)  # [..., i, c, b]
    d2 = 0.5 * (d2 + np.swapaxes(d2, -1, -2))
    dual = np.einsum("...ad,...id->...ai", metric.gamma_inv, tri)
    return np.einsum("...ai,...icb->...abc", dual, d2)


def _lift(spatial: np.ndarray) -> np.ndarray:
    out = np.zeros(spatial.shape[:-3] + (3, 3, 3))
    out[..., 1:, 1:, 1:] = spatial
    return out


def family_table(family: Family, metric: MetricField, conn: ConnectionField | None = None, *, verbatim: bool = False) -> np.ndarray:
    """Connection coefficients ``C[..., alpha, beta, gamma]`` over ``(t, s1, s2)`` for a family."""
    C = _lift(induced_christoffels(metric))
    if family in (Family.GMLM, Family.GMAL):
        return C
    if conn is None:
        raise GeodesicError(f"{family.value} needs the connection field")
    tor = conn.torsion
    if family is Family.SAAG:
        C[..., 1:, 1:, 0] += tor.kappa
        return C
    if family is Family.WAAG:
        return C + (tor.contorsion if verbatim else tor.contorsion_active)
    if family is Family.AUTOPARALLEL:
        om = conn.Omega[..., 1:, 1:]  # Omega^{ij}_b
        C[..., 1:, 1:, 1:] += np.einsum("...ai,...bij,...jc->...abc", tor.dual, om, metric.triads)
        return C
    raise GeodesicError(f"no connection table for {family!r}")


# -- integration -----------------------------------------------------------------


def _steps(t_max: float, h_t: float) -> tuple[int, float]:
    if h_t <= 0:
        raise GeodesicError("step must be positive")
    n = max(int(np.ceil(t_max / h_t - 1e-9)), 0)
    return n, (t_max / n if n else h_t)


def _check_start(chart: SurfaceChart, s0) -> np.ndarray:
    s0 = np.asarray(s0, dtype=float)
    if not (chart.s1[0] < s0[0] < chart.s1[-1] and chart.s2[0] < s0[1] < chart.s2[-1]):
        raise GeodesicError(f"start point {s0} is not interior to the chart")
    return s0


def _run(chart, table: np.ndarray, s0, sdot0, tdot0: float, t_max: float, h_t: float):
    field_ = SplineField(chart.s1, chart.s2, table.reshape(table.shape[:2] + (27,)))
    n, h = _steps(t_max, h_t)
    y0 = np.array([0.0, s0[0], s0[1], tdot0, sdot0[0], sdot0[1]])
    traj, done = kernels.integrate_rk4(field_.tx, field_.ty, field_.coef, y0, h, n, field_.lo, field_.hi)
    traj = np.asarray(traj)
    s = traj[:, 1:3]
    exited = done < n or bool(np.any(s[-1] < field_.lo) or np.any(s[-1] > field_.hi))
    if exited and len(traj) > 1 and (np.any(s[-1] < field_.lo) or np.any(s[-1] > field_.hi)):
        traj = traj[:-1]
    return h * np.arange(len(traj)), traj, exited


def _diagnostics(metric: MetricField, conn, s: np.ndarray, sdot: np.ndarray, q: float | None):
    chart = metric.chart
    emb = SplineField(chart.s1, chart.s2, chart.embedding)
    tri = SplineField(chart.s1, chart.s2, metric.triads)
    gam = SplineField(chart.s1, chart.s2, metric.gamma)
    x = emb.along(s)
    e = tri.along(s)
    g = gam.along(s)
    xdot = np.einsum("nia,na->ni", e, sdot)
    speed = np.sqrt(np.maximum(np.einsum("nab,na,nb->n", g, sdot, sdot), 0.0))
    diag = {"speed": speed, "xdot": xdot}
    if conn is not None and q is not None:
        shift = SplineField(chart.s1, chart.s2, conn.torsion.e_i0).along(s)
        diag["momentum"] = xdot + q * shift
    return x, diag


def _path(family, metric, conn, t, traj, exited, q, **extras) -> GeodesicPath:
    s, sdot = traj[:, 1:3], traj[:, 4:6]
    x, diag = _diagnostics(metric, conn, s, sdot, q)
    return GeodesicPath(family, t, s, sdot, x, q, diag, exited, traj[:, 3], dict(extras))


def integrate_gmlm(chart: SurfaceChart, metric: MetricField, s0, sdot0, t_max: float, h_t: float) -> GeodesicPath:
    """Geodesic of the induced metric, ``s'' + G s' s' = 0``."""
    s0 = _check_start(chart, s0)
    t, traj, exited = _run(chart, family_table(Family.GMLM, metric), s0, np.asarray(sdot0, float), 1.0, t_max, h_t)
    return _path(Family.GMLM, metric, None, t, traj, exited, None)


def integrate_saag(
    chart: SurfaceChart, metric: MetricField, conn: ConnectionField, s0, sdot0, q: float, t_max: float, h_t: float
) -> GeodesicPath:
    """Strongly adiabatic autoparallel, ``s'' + G s' s' + q kappa s' = 0``, with momentum diagnostics."""
    s0 = _check_start(chart, s0)
    table = family_table(Family.SAAG, metric, conn)
    t, traj, exited = _run(chart, table, s0, np.asarray(sdot0, float), float(q), t_max, h_t)
    return _path(Family.SAAG, metric, conn, t, traj, exited, float(q))


def integrate_waag(
    chart: SurfaceChart,
    metric: MetricField,
    conn: ConnectionField,
    s0,
    sdot0,
    q: float,
    t_max: float,
    h_t: float,
    *,
    verbatim: bool = False,
) -> GeodesicPath:
    """Weakly adiabatic autoparallel over ``(t, s1, s2)`` with ``t'(0) = q``.

    Uses the active contorsion by default (``verbatim=True`` for the literal
    one).  The spin-precession propagator is attached as
    ``extras["spin_propagator"]``.
    """
    s0 = _check_start(chart, s0)
    if np.any(np.linalg.det(metric.gamma) <= 0):
        raise GeodesicError("singular induced metric on the chart")
    table = family_table(Family.WAAG, metric, conn, verbatim=verbatim)
    t, traj, exited = _run(chart, table, s0, np.asarray(sdot0, float), float(q), t_max, h_t)
    path = _path(Family.WAAG, metric, conn, t, traj, exited, float(q))
    path.extras["spin_propagator"] = spin_propagator(conn, path)
    return path


def integrate_autoparallel(
    chart: SurfaceChart, metric: MetricField, conn: ConnectionField, s0, sdot0, t_max: float, h_t: float
) -> GeodesicPath:
    """Spatial autoparallel ``s'' + (G + e Omega e) s' s' = 0`` of the Lorentz connection."""
    s0 = _check_start(chart, s0)
    table = family_table(Family.AUTOPARALLEL, metric, conn)
    t, traj, exited = _run(chart, table, s0, np.asarray(sdot0, float), 0.0, t_max, h_t)
    return _path(Family.AUTOPARALLEL, metric, conn, t, traj, exited, None)


def momentum_check(path: GeodesicPath) -> float:
    """``max_t |p(t) - p(0)| / |p(0)|`` for a strongly adiabatic path (absolute when ``p(0)`` vanishes)."""
    if path.family is not Family.SAAG:
        raise GeodesicError("momentum conservation holds for strongly adiabatic paths only")
    p = path.diagnostics["momentum"]
    ref = np.linalg.norm(p[0])
    if ref < 1e-8:
        return float(np.max(np.linalg.norm(p - p[0], axis=1)))
    return float(np.max(np.linalg.norm(p - p[0], axis=1)) / ref)


# -- propagators and covariant conservation ---------------------------------------


def _hermite(s0, v0, s1, v1, h, u):
    """Cubic Hermite position and velocity at fraction ``u`` of a step of length ``h``."""
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    pos = h00 * s0 + h10 * h * v0 + h01 * s1 + h11 * h * v1
    d00 = (6 * u**2 - 6 * u) / h
    d10 = 3 * u**2 - 4 * u + 1
    d01 = (-6 * u**2 + 6 * u) / h
    d11 = 3 * u**2 - 2 * u
    vel = d00 * s0 + d10 * v0 + d01 * s1 + d11 * v1
    return pos, vel


_GAUSS = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)


def _ordered_exponential(path: GeodesicPath, generator) -> np.ndarray:
    """Products ``U_k`` with ``U_{k+1} = U_k exp(Omega_k)``, 4th-order Magnus per step.

    ``generator(s, sdot)`` returns the 2x2 matrix ``B`` of ``U' = U B``.
    """
    n = len(path.t)
    out = np.empty((n, 2, 2), dtype=complex)
    out[0] = np.eye(2)
    for k in range(n - 1):
        h = path.t[k + 1] - path.t[k]
        bs = []
        for u in _GAUSS:
            pos, vel = _hermite(path.s[k], path.sdot[k], path.s[k + 1], path.sdot[k + 1], h, u)
            bs.append(generator(pos, vel))
        b1, b2 = bs
        om = 0.5 * h * (b1 + b2) + (np.sqrt(3) / 12) * h * h * (b2 @ b1 - b1 @ b2)
        out[k + 1] = out[k] @ expm(om)
    return out


def _frak_field(conn: ConnectionField) -> SplineField:
    fa = conn.frakA  # [..., a, s, t]
    return SplineField(conn.chart.s1, conn.chart.s2, np.concatenate([fa.real, fa.imag], axis=-1))


def _frak_at(spl: SplineField, s) -> np.ndarray:
    v = spl(s)
    return v[..., :2] + 1j * v[..., 2:]


def potential_propagator(conn: ConnectionField, path: GeodesicPath, *, hermitian_part: bool = False) -> np.ndarray:
    """``g(t)`` with ``g' = -i g frakA_a s'^a`` (later times multiply on the right)."""
    spl = _frak_field(conn)

    def gen(s, v):
        fa = np.einsum("a,ast->st", v, _frak_at(spl, s))
        if hermitian_part:
            fa = 0.5 * (fa + fa.conj().T)
        return -1j * fa

    return _ordered_exponential(path, gen)


def spin_propagator(conn: ConnectionField, path: GeodesicPath) -> np.ndarray:
    """Ordered exponential of ``Omega^{ij}_a s'^a [sigma_i, sigma_j] / 2`` summed over all ``i, j``."""
    om = SplineField(conn.chart.s1, conn.chart.s2, conn.Omega[..., 1:, 1:])
    comm = np.array([[0.5 * (SIGMA[i] @ SIGMA[j] - SIGMA[j] @ SIGMA[i]) for j in range(3)] for i in range(3)])

    def gen(s, v):
        w = np.einsum("a,aij->ij", v, om(s))
        return np.einsum("ij,ijst->st", w, comm)

    return _ordered_exponential(path, gen)


def covariant_conservation_check(chart: SurfaceChart, conn: ConnectionField, path: GeodesicPath) -> dict:
    """Relative drift of ``g (dD/dt) g^+`` along a path, with ``dD/dt = -sigma_i x'^i``.

    When ``frakA`` is not self-adjoint to 1e-8 along the path only its
    Hermitian part is transported and ``self_adjoint`` is reported False.
    """
    spl = _frak_field(conn)
    defect = 0.0
    for s in path.s:
        fa = _frak_at(spl, s)
        defect = max(defect, float(np.max(np.abs(fa - np.swapaxes(fa.conj(), -1, -2)))))
    self_adjoint = defect <= SELF_ADJOINT_TOL
    g = potential_propagator(conn, path, hermitian_part=not self_adjoint)
    xdot = path.diagnostics["xdot"]
    m = -np.einsum("ni,ist->nst", xdot, np.array(SIGMA))
    ref = np.linalg.norm(m[0])
    if ref == 0:
        return {"residual": 0.0, "self_adjoint": self_adjoint, "adjoint_defect": defect}
    rot = np.einsum("nst,ntu,nvu->nsv", g, m, g.conj())
    res = float(np.max(np.linalg.norm(rot - m[0], axis=(1, 2))) / ref)
    return {"residual": res, "self_adjoint": self_adjoint, "adjoint_defect": defect}


# -- GMAL -------------------------------------------------------------------------

_PROBE_DIRS = np.array(
    [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float
)
_PROBE_DIRS[4:] /= np.sqrt(2)


def _chart_point(fs: FuzzySpace, chart: SurfaceChart, emb: SplineField, s, anchor: np.ndarray) -> QcState:
    """Quasicoherent state on the eigenmanifold over the chart point ``s``."""
    x0 = emb(s)
    d = _node_direction(chart.tag, s)
    if d is None:
        d = local_data(fs, solve_qc(fs, x0, previous=anchor)).n_vec
    return line_root(fs, x0, d, anchor)


def _step_distance(fs, chart, emb, qc: QcState, s, ds) -> float:
    y = emb(np.asarray(s) + ds)
    d = build_displacement(fs, qc.x, y, qc_x=qc, verify=False)
    return quantum_distance(fs, qc, d)


def fit_quantum_metric(fs: FuzzySpace, chart: SurfaceChart, emb: SplineField, qc: QcState, s, probe: float) -> tuple[np.ndarray, float]:
    """Least-squares ``tilde_gamma`` from ``dist^2 = tilde_gamma_ab ds^a ds^b`` on 8 probe directions."""
    rows, rhs = [], []
    for d in _PROBE_DIRS:
        dist = _step_distance(fs, chart, emb, qc, s, probe * d)
        rows.append([d[0] ** 2, 2 * d[0] * d[1], d[1] ** 2])
        rhs.append((dist / probe) ** 2)
    rows, rhs = np.array(rows), np.array(rhs)
    sol, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    resid = float(np.max(np.abs(rows @ sol - rhs)) / np.max(np.abs(rhs)))
    return np.array([[sol[0], sol[1]], [sol[1], sol[2]]]), resid


def quantum_metric_field(fs: FuzzySpace, chart: SurfaceChart, *, probe: float = 1e-3, stride: int = 2):
    """``tilde_gamma`` on every ``stride``-th node; returns grid axes, field and worst fit residual."""
    emb = SplineField(chart.s1, chart.s2, chart.embedding)
    i_idx = np.arange(0, chart.shape[0], stride)
    j_idx = np.arange(0, chart.shape[1], stride)
    out = np.empty((len(i_idx), len(j_idx), 2, 2))
    worst = 0.0
    for a, i in enumerate(i_idx):
        for b, j in enumerate(j_idx):
            g, r = fit_quantum_metric(fs, chart, emb, chart.qc(i, j), (chart.s1[i], chart.s2[j]), probe)
            out[a, b] = g
            worst = max(worst, r)
    if worst > FIT_RESIDUAL_MAX:
        raise GeodesicError(f"quantum metric fit residual {worst:.2e} exceeds {FIT_RESIDUAL_MAX}; shrink the probe step")
    return chart.s1[i_idx], chart.s2[j_idx], out, worst


def metric_christoffels(s1, s2, g: np.ndarray) -> np.ndarray:
    """Levi-Civita symbols ``Gamma^a_{bc}`` of a node metric field."""
    dg = np.stack([grid_derivative(g, s1[1] - s1[0], 0), grid_derivative(g, s2[1] - s2[0], 1)], axis=-1)  # [.., d, c, b]
    ginv = np.linalg.inv(g)
    # Gamma_{dbc} = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    low = 0.5 * (
        np.einsum("...dcb->...dbc", dg) + np.einsum("...dbc->...dbc", dg) - np.einsum("...bcd->...dbc", dg)
    )
    return np.einsum("...ad,...dbc->...abc", ginv, low)


def integrate_gmal(
    fs: FuzzySpace,
    chart: SurfaceChart,
    s0,
    dir0,
    step_delta: float,
    n_steps: int,
    *,
    probe: float = 1e-3,
    stride: int = 2,
    h_t: float | None = None,
) -> GeodesicPath:
    """Discrete equal-quantum-distance polyline along the geodesic of the fitted quantum metric.

    The smooth geodesic of ``tilde_gamma`` (unit speed, RK4) is computed
    first; vertices are then placed on it so that each step has quantum
    distance ``step_delta`` (Brent root of the along-curve parameter).
    """
    s0 = _check_start(chart, s0)
    emb = SplineField(chart.s1, chart.s2, chart.embedding)
    i0 = int(np.argmin(np.abs(chart.s1 - s0[0])))
    j0 = int(np.argmin(np.abs(chart.s2 - s0[1])))
    qc0 = _chart_point(fs, chart, emb, s0, chart.qc(i0, j0).amps)
    if step_delta == 0 or n_steps == 0:
        x = np.array([qc0.x])
        return GeodesicPath(
            Family.GMAL, np.zeros(1), s0[None], np.zeros((1, 2)), x, None, {"speed": np.zeros(1)}, False
        )
    g1, g2, gt, resid = quantum_metric_field(fs, chart, probe=probe, stride=stride)
    tg = SplineField(g1, g2, gt)
    d0 = np.asarray(dir0, dtype=float)
    d0 = d0 / np.sqrt(d0 @ tg(s0) @ d0)

    table = _lift(metric_christoffels(g1, g2, gt))
    field_ = SplineField(g1, g2, table.reshape(table.shape[:2] + (27,)))
    h = h_t if h_t is not None else step_delta / 4
    n_smooth = int(np.ceil(1.5 * n_steps * step_delta / h)) + 8
    y0 = np.array([0.0, s0[0], s0[1], 0.0, d0[0], d0[1]])
    traj, _ = kernels.integrate_rk4(field_.tx, field_.ty, field_.coef, y0, h, n_smooth, field_.lo, field_.hi)
    traj = np.asarray(traj)
    inside = np.all((traj[:, 1:3] >= field_.lo) & (traj[:, 1:3] <= field_.hi), axis=1)
    traj = traj[: int(np.argmin(inside)) if not inside.all() else len(traj)]
    ss, vs = traj[:, 1:3], traj[:, 4:6]

    def curve(tau):
        k = min(int(tau / h), len(ss) - 2)
        pos, vel = _hermite(ss[k], vs[k], ss[k + 1], vs[k + 1], h, tau / h - k)
        return pos, vel

    verts, vels, taus, dists = [s0], [d0], [0.0], [0.0]
    qc, tau = qc0, 0.0
    exited = False
    tau_end = h * (len(ss) - 1)
    for _ in range(n_steps):
        base = verts[-1]

        def f(tt):
            return _step_distance(fs, chart, emb, qc, base, curve(tt)[0] - base) - step_delta

        hi_t = tau + step_delta
        while hi_t < tau_end and f(hi_t) < 0:
            hi_t = min(hi_t + 0.5 * step_delta, tau_end)
        if hi_t >= tau_end and f(tau_end) < 0:
            exited = True
            break
        tau = brentq(f, tau + 1e-3 * step_delta, hi_t, xtol=1e-15, rtol=1e-15)
        dists.append(f(tau) + step_delta)
        pos, vel = curve(tau)
        qc = _chart_point(fs, chart, emb, pos, qc.amps)
        verts.append(pos)
        vels.append(vel)
        taus.append(tau)
    s = np.array(verts)
    x = emb.along(s)
    speed = np.sqrt(np.einsum("nab,na,nb->n", tg.along(s), np.array(vels), np.array(vels)))
    smooth = GeodesicPath(
        Family.GMAL, h * np.arange(len(ss)), ss, vs, emb.along(ss), None, {"speed": np.ones(len(ss))}, False
    )
    return GeodesicPath(
        Family.GMAL,
        np.array(taus),
        s,
        np.array(vels),
        x,
        None,
        {"speed": speed, "step_distance": np.array(dists)},
        exited,
        extras={"smooth": smooth, "tilde_gamma": (g1, g2, gt), "fit_residual": resid},
    )


__all__ = [
    "Family",
    "GeodesicError",
    "GeodesicPath",
    "SplineField",
    "covariant_conservation_check",
    "family_table",
    "fit_quantum_metric",
    "induced_christoffels",
    "integrate_autoparallel",
    "integrate_gmal",
    "integrate_gmlm",
    "integrate_saag",
    "integrate_waag",
    "metric_christoffels",
    "momentum_check",
    "potential_propagator",
    "quantum_metric_field",
    "spin_propagator",
]
