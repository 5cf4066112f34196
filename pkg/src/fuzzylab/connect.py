"""Berry potential and curvature, the operator-valued potential, the Lorentz
connection and the torsion/contorsion fields of a chart.

Spacetime indices run over ``0`` (time) and ``1..3`` (space) for the Lorentz
connection, and over ``0`` (time) and ``1, 2`` (chart coordinates) for the
Christoffel-type arrays, which are stored as ``[..., alpha, beta, gamma]``
with shape ``(3, 3, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import ChartError, ChartTag, MetricField, SurfaceChart, grid_derivative, metric_field
from .opcore import SIGMA, FuzzySpace, dirac_matrix
from .qcstate import near_null_eigensystem

SIGMAS = np.array(SIGMA)
LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_j, _i, _k] = -1.0

MIN_LINK = 0.5
CLUSTER_TOL = 1e-6
PINV_TOL = 1e-10


def _overlap(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...k,...k->...", u.conj(), v)


def _check_links(ov: np.ndarray, what: str) -> None:
    worst = float(np.min(np.abs(ov))) if ov.size else 1.0
    if worst < MIN_LINK:
        raise ChartError(f"{what}: neighbouring overlap {worst:.3f} below {MIN_LINK}; refine the grid")


def berry_potential(chart: SurfaceChart) -> np.ndarray:
    """``A_a`` on every node in the chart's gauge, shape ``(n1, n2, 2)``.

    Log-overlap discretisation.  With ``phi_k = arg<Lambda(s - k h e_a)|Lambda(s + k h e_a)>``
    interior nodes use the Richardson combination ``(8 phi_1 - phi_2) / 12h``
    (fourth order), the nodes next to an edge ``phi_1 / 2h``, and edge nodes the
    second-order one-sided combination of the two outermost links.
    """
    if chart.tag is ChartTag.ISOLATED:
        raise ChartError("no Berry potential on an isolated-point chart")
    st = chart.states
    out = np.empty(st.shape[:2] + (2,))
    for a, h in ((0, chart.h1), (1, chart.h2)):
        s = np.moveaxis(st, a, 0)
        n = s.shape[0]
        links = _overlap(s[:-1], s[1:])
        c1 = _overlap(s[:-2], s[2:])
        _check_links(links, "berry_potential")
        _check_links(c1, "berry_potential")
        res = np.empty(s.shape[:2])
        res[1:-1] = np.angle(c1) / (2 * h)
        if n >= 5:
            c2 = _overlap(s[:-4], s[4:])
            _check_links(c2, "berry_potential")
            res[2:-2] = (8 * np.angle(c1[1:-1]) - np.angle(c2)) / (12 * h)
        lk = np.angle(links)
        res[0] = (3 * lk[0] - lk[1]) / (2 * h)
        res[-1] = (3 * lk[-1] - lk[-2]) / (2 * h)
        out[..., a] = np.moveaxis(res, 0, a)
    return out


def berry_curvature_plaquette(chart: SurfaceChart) -> np.ndarray:
    """Gauge-invariant curvature per plaquette, shape ``(n1 - 1, n2 - 1)``.

    ``F = arg(<1|2><2|3><3|4><4|1>) / (h1 h2)`` around the plaquette traversed
    counter-clockwise in the ``(s1, s2)`` plane.
    """
    if chart.tag is ChartTag.ISOLATED:
        raise ChartError("no curvature on an isolated-point chart")
    st = chart.states
    p1, p2, p3, p4 = st[:-1, :-1], st[1:, :-1], st[1:, 1:], st[:-1, 1:]
    links = [_overlap(p1, p2), _overlap(p2, p3), _overlap(p3, p4), _overlap(p4, p1)]
    for ln in links:
        _check_links(ln, "berry_curvature_plaquette")
    loop = links[0] * links[1] * links[2] * links[3]
    phase = np.angle(loop)
    if np.any(np.abs(phase) >= np.pi / 2):
        raise ChartError("plaquette holonomy too large (|arg| >= pi/2); refine the grid")
    return phase / (chart.h1 * chart.h2)


def node_average(plaq: np.ndarray) -> np.ndarray:
    """Average of the (up to four) plaquettes touching each node."""
    n1, n2 = plaq.shape[0] + 1, plaq.shape[1] + 1
    acc = np.zeros((n1, n2))
    cnt = np.zeros((n1, n2))
    for di in (0, 1):
        for dj in (0, 1):
            acc[di : di + n1 - 1, dj : dj + n2 - 1] += plaq
            cnt[di : di + n1 - 1, dj : dj + n2 - 1] += 1
    return acc / cnt


def total_flux(chart: SurfaceChart) -> float:
    """Sum of plaquette holonomy phases over the chart."""
    return float(np.sum(berry_curvature_plaquette(chart)) * chart.h1 * chart.h2)


def spin_densities(states: np.ndarray) -> np.ndarray:
    b = states.reshape(states.shape[:-1] + (2, -1))
    return np.einsum("...sn,...tn->...st", b, b.conj())


def purity_vectors(states: np.ndarray) -> np.ndarray:
    rho = spin_densities(states)
    return np.einsum("...st,kts->...k", rho, SIGMAS).real


def state_derivatives(fs: FuzzySpace, chart: SurfaceChart, triads: np.ndarray, A: np.ndarray) -> np.ndarray:
    """``d Lambda / ds^a`` in the chart gauge, shape ``(n1, n2, 2, 2n)``.

    Differentiating ``D_x Lambda = 0`` along the chart gives
    ``D_x dLambda = (1 - P) tau_a Lambda`` with ``tau_a = sigma_k dx^k/ds^a``; the
    component along ``Lambda`` is ``i A_a``.  The transverse part is obtained by
    solving with ``D_x`` regularised on its near-null cluster, so truncation
    ghosts of the Fock space stay out of the derivative.
    """
    n1, n2 = chart.shape
    st = chart.states
    out = np.empty((n1, n2, 2, st.shape[-1]), dtype=complex)
    for i in range(n1):
        for j in range(n2):
            psi = st[i, j]
            x = chart.embedding[i, j]
            w, v = near_null_eigensystem(fs, x)
            null = v[:, np.abs(w) < CLUSTER_TOL]
            if null.shape[1] == 0 or abs(np.vdot(psi, null @ (null.conj().T @ psi))) < 0.5:
                null = np.column_stack([psi, null])
            q, _ = np.linalg.qr(null)
            d = dirac_matrix(fs, x) + q @ q.conj().T
            b = psi.reshape(2, -1)
            rhs = []
            for a in range(2):
                tau = np.einsum("k,kst->st", triads[i, j, :, a], SIGMAS)
                r = (tau @ b).reshape(-1)
                r = r - q @ (q.conj().T @ r)
                rhs.append(r)
            sol = np.linalg.solve(d, np.column_stack(rhs))
            for a in range(2):
                out[i, j, a] = sol[:, a] + 1j * A[i, j, a] * psi
    return out


def difference_derivatives(chart: SurfaceChart) -> np.ndarray:
    """``d Lambda / ds^a`` by finite differences of the chart-gauge states."""
    st = chart.states
    d1 = grid_derivative(st, chart.h1, 0)
    d2 = grid_derivative(st, chart.h2, 1)
    return np.stack([d1, d2], axis=2)


def _pinv_psd(rho: np.ndarray, tol: float = PINV_TOL) -> np.ndarray:
    w, u = np.linalg.eigh(rho)
    inv = np.where(w > tol, 1.0 / np.where(w > tol, w, 1.0), 0.0)
    return np.einsum("...ik,...k,...jk->...ij", u, inv, u.conj())


def nonabelian_potential(
    fs: FuzzySpace,
    chart: SurfaceChart,
    metric: MetricField | None = None,
    A: np.ndarray | None = None,
    *,
    method: str = "response",
    rank_tol: float = PINV_TOL,
) -> np.ndarray:
    """Operator-valued potential ``frakA_a`` per node, shape ``(n1, n2, 2, 2, 2)``.

    ``M_a[s, t] = -i <Lambda_t|d_a Lambda_s>`` is the partial trace of
    ``-i |d_a Lambda><Lambda|`` over ``H`` and ``frakA_a = M_a pinv(rho)``, the
    pseudo-inverse dropping eigenvalues of ``rho`` below ``rank_tol`` (1e-10).
    A larger ``rank_tol`` treats weakly entangled states as pure, which is
    the first-order convention of the deformed planes.  ``method``
    picks the state derivative: ``"response"`` (exact linear response, default)
    or ``"difference"`` (finite differences of the cached states).
    """
    if metric is None:
        metric = metric_field(fs, chart)
    if A is None:
        A = berry_potential(chart)
    if method == "response":
        dst = state_derivatives(fs, chart, metric.triads, A)
    elif method == "difference":
        dst = difference_derivatives(chart)
    else:
        raise ValueError(f"unknown derivative method {method!r}")
    b = chart.states.reshape(chart.states.shape[:-1] + (2, -1))
    db = dst.reshape(dst.shape[:-1] + (2, -1))
    m = -1j * np.einsum("ijasn,ijtn->ijast", db, b.conj())
    pinv = _pinv_psd(spin_densities(chart.states), rank_tol)
    return np.einsum("ijast,ijtu->ijasu", m, pinv)


def lorentz_connection(frakA: np.ndarray) -> np.ndarray:
    """``Omega^{mu nu}_a`` per node, shape ``(..., 2, 4, 4)``.

    ``Omega^{jk} = -eps^{jk}_i Re tr(sigma^i frakA)`` and
    ``Omega^{i0} = -Omega^{0i} = Im tr(sigma^i frakA)``.
    """
    tr = np.einsum("kst,...ts->...k", SIGMAS, frakA)
    om = np.zeros(frakA.shape[:-2] + (4, 4))
    om[..., 1:, 1:] = -np.einsum("jki,...i->...jk", LEVI_CIVITA, tr.real)
    om[..., 1:, 0] = tr.imag
    om[..., 0, 1:] = -tr.imag
    return om


def active_potential(frakA: np.ndarray, n_vec: np.ndarray) -> np.ndarray:
    """Part of ``frakA`` that moves the spin density matrix.

    Removes the components along the identity and along ``n.sigma``, both of
    which commute with ``rho`` and so generate no precession.
    """
    nrm = np.linalg.norm(n_vec, axis=-1, keepdims=True)
    nhat = np.where(nrm > 1e-12, n_vec / np.where(nrm > 1e-12, nrm, 1.0), 0.0)
    ns = np.einsum("...k,kst->...st", nhat, SIGMAS)
    ns = ns[..., None, :, :] if frakA.ndim == ns.ndim + 1 else ns
    eye = np.eye(2)
    tr0 = np.trace(frakA, axis1=-2, axis2=-1)
    trn = np.einsum("...st,...ts->...", ns, frakA)
    return frakA - 0.5 * tr0[..., None, None] * eye - 0.5 * trn[..., None, None] * ns


@dataclass(frozen=True, eq=False)
class TorsionField:
    """Tetrad-derived torsion and contorsion arrays on a chart.

    ``torsion[..., a, b, c]`` and ``torsion0[..., a, b]`` are ``T^a_{bc}`` and
    ``T^0_{ab}``; ``kappa[..., a, b] = kappa^a_{b0}``; ``contorsion`` and
    ``contorsion_active`` are ``K^alpha_{beta gamma}`` over ``(t, s1, s2)``, the
    latter built from ``active_potential``.
    """

    e_i0: np.ndarray
    e_a0: np.ndarray
    dual: np.ndarray
    torsion: np.ndarray
    torsion0: np.ndarray
    kappa: np.ndarray
    contorsion: np.ndarray
    contorsion_active: np.ndarray


def _contorsion(frakA, kappa, dual, e_i0, e_a0, triads):
    tr = np.einsum("kst,...ts->...k", SIGMAS, frakA)  # [..., b, k]
    om_sp = -np.einsum("jki,...bi->...bjk", LEVI_CIVITA, tr.real)  # Omega^{jk}_b
    om_t = tr.imag  # Omega^{i0}_b
    shape = kappa.shape[:-2]
    K = np.zeros(shape + (3, 3, 3))
    # K^0_{b0} = Im tr(sigma^j frakA_b) e^j_0
    k0b0 = np.einsum("...bj,...j->...b", om_t, e_i0)
    K[..., 0, 1:, 0] = k0b0
    # K^0_{bc} = Im tr(sigma^j frakA_b) e^j_c
    k0bc = np.einsum("...bj,...jc->...bc", om_t, triads)
    K[..., 0, 1:, 1:] = k0bc
    # K^a_{b0} = kappa + e^a_0 K^0_{b0} + e^a_i Omega^{i0}_b - e^a_i Omega^{ij}_b e^j_0
    kab0 = (
        kappa
        + np.einsum("...a,...b->...ab", e_a0, k0b0)
        + np.einsum("...ai,...bi->...ab", dual, om_t)
        - np.einsum("...ai,...bij,...j->...ab", dual, om_sp, e_i0)
    )
    K[..., 1:, 1:, 0] = kab0
    # K^a_{bc} = -e^a_i Omega^{ij}_b e^j_c + e^a_0 Im tr(sigma^j frakA_b) e^j_c
    kabc = -np.einsum("...ai,...bij,...jc->...abc", dual, om_sp, triads) + np.einsum(
        "...a,...bc->...abc", e_a0, k0bc
    )
    K[..., 1:, 1:, 1:] = kabc
    return K


def torsion_contorsion(
    chart: SurfaceChart, metric: MetricField, frakA: np.ndarray, A: np.ndarray
) -> TorsionField:
    """Tetrads, torsion ``T``, contorsion ``kappa`` and the full contorsion ``K``.

    Tetrads: ``e^i_0 = gamma^{ab} A_a dx^i/ds^b``, dual triads
    ``e^a_i = gamma^{ad} dx^i/ds^d`` and ``e^a_0 = -gamma^{ab} A_b``.  Lorentz
    indices are lowered with ``diag(+, -, -, -)``.
    """
    triads = metric.triads
    try:
        ginv = np.linalg.inv(metric.gamma)
    except np.linalg.LinAlgError as exc:
        raise ChartError("singular induced metric") from exc
    dual = np.einsum("...ad,...id->...ai", ginv, triads)
    shift = np.einsum("...ab,...a->...b", ginv, A)
    e_i0 = np.einsum("...b,...ib->...i", shift, triads)
    e_a0 = -np.einsum("...ab,...b->...a", ginv, A)

    de0 = np.stack([grid_derivative(e_i0, chart.h1, 0), grid_derivative(e_i0, chart.h2, 1)], axis=-1)
    kappa = np.einsum("...ai,...ib->...ab", dual, de0)

    tr = np.einsum("kst,...ts->...k", SIGMAS, frakA)
    # X_{bc}^a = gamma^{ad} eps_{ijk} Re tr(sigma_k A_b) e^j_c e^i_d - gamma^{ad} Im tr(sigma_j A_b) e^j_c A_d
    xs = np.einsum("...ai,ijk,...bk,...jc->...abc", dual, LEVI_CIVITA, tr.real, triads)
    xs = xs - np.einsum("...ad,...d,...bj,...jc->...abc", ginv, A, tr.imag, triads)
    torsion = xs - np.swapaxes(xs, -1, -2)
    x0 = np.einsum("...ai,...ib->...ab", tr.imag, triads)
    torsion0 = x0 - np.swapaxes(x0, -1, -2)

    K = _contorsion(frakA, kappa, dual, e_i0, e_a0, triads)
    n_vec = purity_vectors(chart.states)
    K_act = _contorsion(active_potential(frakA, n_vec), kappa, dual, e_i0, e_a0, triads)
    return TorsionField(e_i0, e_a0, dual, torsion, torsion0, kappa, K, K_act)


def curvature_from_contorsion(metric: MetricField, kappa: np.ndarray) -> np.ndarray:
    """``F_12 = gamma_{2c} kappa^c_{10} - gamma_{1c} kappa^c_{20}`` per node."""
    g = metric.gamma
    x = np.einsum("...bc,...ca->...ba", g, kappa)  # gamma_{bc} kappa^c_{a0}
    return x[..., 1, 0] - x[..., 0, 1]


@dataclass(frozen=True, eq=False)
class ConnectionField:
    chart: SurfaceChart
    metric: MetricField
    A: np.ndarray
    F_plaq: np.ndarray
    frakA: np.ndarray
    Omega: np.ndarray
    torsion: TorsionField

    @property
    def F_nodes(self) -> np.ndarray:
        return node_average(self.F_plaq)


def connection_field(
    fs: FuzzySpace,
    chart: SurfaceChart,
    metric: MetricField | None = None,
    *,
    method: str = "response",
    rank_tol: float = PINV_TOL,
) -> ConnectionField:
    """All connection data of a chart in one pass."""
    if metric is None:
        metric = metric_field(fs, chart)
    A = berry_potential(chart)
    F = berry_curvature_plaquette(chart)
    frakA = nonabelian_potential(fs, chart, metric, A, method=method, rank_tol=rank_tol)
    om = lorentz_connection(frakA)
    tor = torsion_contorsion(chart, metric, frakA, A)
    return ConnectionField(chart, metric, A, F, frakA, om, tor)


__all__ = [
    "ConnectionField",
    "TorsionField",
    "active_potential",
    "berry_curvature_plaquette",
    "berry_potential",
    "connection_field",
    "curvature_from_contorsion",
    "lorentz_connection",
    "node_average",
    "nonabelian_potential",
    "purity_vectors",
    "spin_densities",
    "state_derivatives",
    "torsion_contorsion",
    "total_flux",
]
