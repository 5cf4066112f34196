"""Displacement operators between quasicoherent states and the quantum distance.

A displacement ``D(y, x)`` acts on ``H`` and, together with a spin factor ``u``
acting on ``C^2``, maps the quasicoherent state at ``x`` onto the one at ``y``.
Its Hermitian generator ``dPi`` (``D = exp(i dPi)``) defines the linking-vector
observables ``-i[dPi, X^i]`` whose root-sum-square gives the quantum distance.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .opcore import (
    FuzzySpace,
    ModelTag,
    annihilation,
    creation,
    fock_tail_weight,
    number_op,
    spin_matrices,
)
from .qcstate import QcState, solve_qc, sphere_angles, sphere_rotation

TOL_LINK = 1e-6
NEG_CLAMP = 1e-10
NEG_FAIL = 1e-8
TAIL_LIMIT = 1e-10


class NotLinkable(ValueError):
    """The two points cannot be linked by a displacement of this model."""

    def __init__(self, message: str, overlap: float | None = None):
        super().__init__(message)
        self.overlap = overlap


class TruncationRisk(UserWarning):
    """A displaced state puts noticeable weight on the top Fock levels."""


class DisplacementKind(str, enum.Enum):
    WEYL_PLANE = "WeylPlane"
    SPHERE_ROTATION = "SphereRotation"
    CIRCLE_POWER = "CirclePower"
    PARALINKABLE_PAIR = "ParalinkablePair"


WEYL_MODELS = frozenset(
    {ModelTag.FUZZY_PLANE, ModelTag.ELLIPTIC_PARABOLOID, ModelTag.HYPERBOLIC_PARABOLOID, ModelTag.FLAMM_PARABOLOID}
)


@dataclass(frozen=True, eq=False)
class Displacement:
    """Displacement operator with its generator and spin factor.

    For ``CirclePower`` the generator ``(2 pi p / N) N`` is paired with the
    derivation rule ``[N, Z] = -Z`` of the circle algebra when building
    linking vectors (``derivation_rule``); the literal matrix commutator of the
    truncated shift differs from it by a wrap-around term.  For
    ``ParalinkablePair``, ``op`` and ``generator`` are ``(plus, minus)`` pairs in
    the ``|+>, |->`` spin basis.
    """

    kind: DisplacementKind
    op: np.ndarray | tuple[np.ndarray, np.ndarray]
    generator: np.ndarray | tuple[np.ndarray, np.ndarray] | None
    u_spin: np.ndarray
    from_x: np.ndarray
    to_y: np.ndarray
    overlap: float
    derivation_rule: bool = False
    warnings: tuple[str, ...] = field(default=())


def weyl_generator(n: int, delta: complex) -> np.ndarray:
    """Hermitian ``dPi = -i(delta a^+ - conj(delta) a)``, so ``exp(i dPi)`` is the Weyl shift."""
    a, ad = annihilation(n), creation(n)
    return -1j * (delta * ad - np.conj(delta) * a)


def weyl_operator(n: int, delta: complex) -> np.ndarray:
    return expm(1j * weyl_generator(n, delta))


def _alpha(x) -> complex:
    return complex(x[0], x[1])


def _weyl_spin_factor(fs: FuzzySpace, alpha: complex, beta: complex) -> np.ndarray:
    phase = np.exp(1j * np.imag(alpha * np.conj(beta)))
    eps = float(fs.params.get("epsilon", 0.0))
    u = np.eye(2, dtype=complex)
    if fs.model_tag is ModelTag.ELLIPTIC_PARABOLOID:
        u[1, 0] = eps * (alpha - beta)
    elif fs.model_tag is ModelTag.HYPERBOLIC_PARABOLOID:
        u[1, 0] = eps * (np.conj(alpha) - np.conj(beta))
    return phase * u


def _link_overlap(target: np.ndarray, image: np.ndarray) -> float:
    nrm = np.linalg.norm(image)
    if nrm == 0:
        return 0.0
    return float(abs(np.vdot(target, image)) / nrm)


def apply_pair(u: np.ndarray, op: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """``(u (x) op) psi`` in the spin-major layout."""
    b = psi.reshape(2, -1)
    return (u @ (b @ op.T)).reshape(-1)


def _tail_warnings(fs: FuzzySpace, psi: np.ndarray) -> tuple[str, ...]:
    if not fs.is_plane_family:
        return ()
    w = fock_tail_weight(psi.reshape(2, -1))
    if w > TAIL_LIMIT:
        msg = f"displaced state has tail weight {w:.2e} on the top Fock levels"
        warnings.warn(msg, TruncationRisk, stacklevel=3)
        return (msg,)
    return ()


def _axis_angle(u: np.ndarray) -> tuple[float, np.ndarray]:
    """``u = exp(i theta n.sigma / 2)`` for ``u`` in SU(2)."""
    c = np.clip(np.real(np.trace(u)) / 2, -1.0, 1.0)
    half = np.arccos(c)
    s = np.sin(half)
    if s < 1e-14:
        return 0.0, np.array([0.0, 0.0, 1.0])
    sig = (np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]]))
    n = np.array([np.real(np.trace(sg @ u) / (2j * s)) for sg in sig])
    return 2 * half, n / np.linalg.norm(n)


def build_displacement(
    fs: FuzzySpace,
    x,
    y,
    *,
    qc_x: QcState | None = None,
    qc_y: QcState | None = None,
    tol_link: float | None = None,
    verify: bool = True,
) -> Displacement:
    """Displacement from ``x`` to ``y`` for a linkable or paralinkable model.

    The link is verified: the normalised overlap of ``(u (x) D) Lambda(x)`` with
    ``Lambda(y)`` must reach ``1 - tol_link`` (default 1e-6, or ``10 eps^2`` on
    the deformed planes and the hyperboloid where the spin factor is first
    order in ``eps``).  ``verify=False`` skips the check (``overlap`` is then
    NaN), for repeated probe displacements whose end state is not needed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tag = fs.model_tag
    n = fs.hilbert_dim
    eps = float(fs.params.get("epsilon", 0.0))
    if tol_link is None:
        tol_link = TOL_LINK if eps == 0.0 else max(TOL_LINK, 10 * eps**2)
    qx = qc_x if qc_x is not None else solve_qc(fs, x)
    qy = None
    if verify:
        qy = qc_y if qc_y is not None else solve_qc(fs, y)
    derivation = False

    if tag in WEYL_MODELS:
        alpha, beta = _alpha(x), _alpha(y)
        gen = weyl_generator(n, beta - alpha)
        op = expm(1j * gen)
        u = _weyl_spin_factor(fs, alpha, beta)
        kind = DisplacementKind.WEYL_PLANE
    elif tag is ModelTag.FUZZY_SPHERE:
        j = float(fs.params["j"])
        tx, px = sphere_angles(x)
        ty, py = sphere_angles(y)
        u = sphere_rotation(0.5, ty, py) @ np.linalg.inv(sphere_rotation(0.5, tx, px))
        theta, axis = _axis_angle(u)
        jm = spin_matrices(j)
        gen = theta * sum(axis[k] * jm[k] for k in range(3))
        op = expm(1j * gen)
        kind = DisplacementKind.SPHERE_ROTATION
    elif tag is ModelTag.FUZZY_CIRCLE:
        qx_idx = np.arctan2(x[1], x[0]) * n / (2 * np.pi)
        qy_idx = np.arctan2(y[1], y[0]) * n / (2 * np.pi)
        p = (qy_idx - qx_idx + n / 2) % n - n / 2
        if abs(p - round(p)) > 1e-8:
            raise NotLinkable("circle displacements link roots of unity only")
        p = float(round(p))
        gen = (2 * np.pi * p / n) * number_op(n)
        op = expm(1j * gen)
        u = np.eye(2, dtype=complex)
        kind = DisplacementKind.CIRCLE_POWER
        derivation = True
    elif tag is ModelTag.HYPERBOLOID:
        data = paralinkable_data(fs, _alpha(x), _alpha(y))
        image = apply_paralinkable(data["D_plus"], data["D_minus"], qx.amps)
        ov = _link_overlap(qy.amps, image) if verify else float("nan")
        if verify and ov < 1 - tol_link:
            raise NotLinkable(f"paralinkable map misses the target state (overlap {ov:.6f})", ov)
        return Displacement(
            DisplacementKind.PARALINKABLE_PAIR,
            (data["D_plus"], data["D_minus"]),
            (data["generator_plus"], data["generator_minus"]),
            np.eye(2, dtype=complex),
            x,
            y,
            ov,
            warnings=_tail_warnings(fs, image),
        )
    else:
        raise NotLinkable(f"no displacement operator is known for model {tag!r}")

    image = apply_pair(u, op, qx.amps)
    ov = _link_overlap(qy.amps, image) if verify else float("nan")
    if verify and ov < 1 - tol_link:
        raise NotLinkable(f"displaced state misses the target (overlap {ov:.9f})", ov)
    return Displacement(kind, op, gen, u, x, y, ov, derivation, _tail_warnings(fs, image))


def linking_vector(fs: FuzzySpace, d: Displacement) -> tuple[list[np.ndarray], list[np.ndarray] | None]:
    """``(D^+ X^i D - X^i, -i[dPi, X^i])`` for ``i = 1, 2, 3``.

    The second list is the first-order form and is ``None`` for paralinkable
    pairs (see ``paralinkable_linking``).
    """
    if d.kind is DisplacementKind.PARALINKABLE_PAIR:
        op = d.op[0]
    else:
        op = d.op
    exact = [op.conj().T @ fs.x(i) @ op - fs.x(i) for i in range(3)]
    if d.kind is DisplacementKind.PARALINKABLE_PAIR or d.generator is None:
        return exact, None
    return exact, first_order_linking(fs, d)


def first_order_linking(fs: FuzzySpace, d: Displacement) -> list[np.ndarray]:
    gen = d.generator
    if d.derivation_rule:
        # dPi = c N with [N, Z] = -Z: -i[dPi, Z] = i c Z, and X^3 = eps N commutes with N
        c = float(np.real(gen[1, 1] - gen[0, 0])) if gen.shape[0] > 1 else 0.0
        dz = 1j * c * fs.z
        return [0.5 * (dz + dz.conj().T), -0.5j * (dz - dz.conj().T), np.zeros_like(gen)]
    return [-1j * (gen @ fs.x(i) - fs.x(i) @ gen) for i in range(3)]


def distance_operator(ells) -> np.ndarray:
    """``G = sum_i l_i l_i`` from three linking-vector operators."""
    g = sum(e @ e for e in ells)
    return 0.5 * (g + g.conj().T)


def psd_sqrt(g: np.ndarray, *, strict: bool = True) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix by eigendecomposition.

    Negative eigenvalues are clamped to zero.  With ``strict`` anything below
    ``-1e-8`` (relative to the largest eigenvalue when that exceeds one)
    signals an inconsistent generator and raises.
    """
    w, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    if strict and w.size and w[0] < -NEG_FAIL * max(1.0, float(np.max(np.abs(w)))):
        raise ValueError(f"distance operator has eigenvalue {w[0]:.3e} < 0")
    w = np.where(w < 0, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def low_tail_levels(fs: FuzzySpace, blocks: int = 1) -> np.ndarray | None:
    """Indices away from the top Fock levels, where truncated products are exact."""
    if not fs.is_plane_family:
        return None
    n = fs.hilbert_dim
    top = min(6, n // 4)
    return np.concatenate([np.arange(k * n, (k + 1) * n - top) for k in range(blocks)])


def _compressed_expectation(g: np.ndarray, psi: np.ndarray, keep, strict: bool = True) -> tuple[float, float]:
    """``<psi| sqrt(g) |psi>`` with ``g`` compressed to ``keep``; also the clamped negative weight."""
    if keep is not None:
        g = g[np.ix_(keep, keep)]
        psi = psi[keep]
    w, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    if strict and w.size and w[0] < -NEG_FAIL * max(1.0, float(np.max(np.abs(w)))):
        raise ValueError(f"distance operator has eigenvalue {w[0]:.3e} < 0")
    c = v.conj().T @ psi
    wc = np.where(w < 0, 0.0, w)
    neg = float(np.sum(np.abs(c[w < 0]) ** 2 * np.sqrt(-w[w < 0])))
    return float(np.sum(np.abs(c) ** 2 * np.sqrt(wc))), neg


def quantum_distance(fs: FuzzySpace, qc_at_x: QcState | np.ndarray, d: Displacement, *, off: bool = False) -> float:
    """``<Lambda(x)| 1 (x) sqrt(G) |Lambda(x)>`` with ``G = -sum_i [dPi, X^i]^2``.

    Paralinkable pairs use the 2 x 2 block operator of the two quantum paths in
    the ``|+>, |->`` basis; ``off=True`` drops the correlation blocks.
    """
    psi = qc_at_x.amps if isinstance(qc_at_x, QcState) else np.asarray(qc_at_x)
    if d.kind is DisplacementKind.PARALINKABLE_PAIR:
        return paralinkable_distance(fs, psi, d, off=off)["distance"]
    if d.generator is None:
        raise ValueError("displacement has no generator")
    g = distance_operator(first_order_linking(fs, d))
    keep = low_tail_levels(fs)
    total = 0.0
    for b in psi.reshape(2, -1):
        if np.any(b):
            total += _compressed_expectation(g, b, keep)[0]
    return total


def distance_between(fs: FuzzySpace, x, y, qc_x: QcState | None = None) -> float:
    qx = qc_x if qc_x is not None else solve_qc(fs, x)
    d = build_displacement(fs, x, y, qc_x=qx, tol_link=1.0)
    return quantum_distance(fs, qx, d)


def metric_distance(gamma: np.ndarray, ds) -> float:
    ds = np.asarray(ds, dtype=float)
    return float(np.sqrt(ds @ gamma @ ds))


def nc_gauge_potential(fs: FuzzySpace, d_path) -> tuple[list[list[np.ndarray]], float]:
    """Per-step potentials ``D^+ X^i D - X^i`` and the largest curvature residual.

    The curvature on a pair of coordinate derivations is expanded as
    ``[X, B(Y)] - [Y, B(X)] - B([X, Y]) - i[B(X), B(Y)]`` with
    ``B(W) = i D^+ [W, D]``, which vanishes identically for a unitary ``D``.
    """
    pots = []
    worst = 0.0
    xs = [fs.x(i) for i in range(3)]
    for d in d_path:
        op = d.op[0] if isinstance(d.op, tuple) else d.op
        opd = op.conj().T
        pots.append([opd @ xi @ op - xi for xi in xs])

        def b(w):
            return 1j * opd @ (w @ op - op @ w)

        for i in range(3):
            for j in range(i + 1, 3):
                xi, xj = xs[i], xs[j]
                bi, bj = b(xi), b(xj)
                f = (xi @ bj - bj @ xi) - (xj @ bi - bi @ xj) - b(xi @ xj - xj @ xi) - 1j * (bi @ bj - bj @ bi)
                worst = max(worst, float(np.max(np.abs(f))))
    return pots, worst


# -- paralinkable pairs ------------------------------------------------------

PLUS_MINUS = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _shifted_number_pinv(n: int, alpha: complex) -> np.ndarray:
    """Pseudo-inverse of ``(a^+ - conj(alpha))(a - alpha)`` as ``D(alpha) N^+ D(alpha)^+``."""
    dal = weyl_operator(n, alpha)
    inv = np.diag([0.0] + [1.0 / k for k in range(1, n)])
    return dal @ inv @ dal.conj().T


def apply_paralinkable(d_plus: np.ndarray, d_minus: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """``(P_+ (x) D^+ + P_- (x) D^-) psi`` with spin projectors on ``|+->``."""
    b = PLUS_MINUS.conj().T @ psi.reshape(2, -1)
    out = np.vstack([b[0] @ d_plus.T, b[1] @ d_minus.T])
    return (PLUS_MINUS @ out).reshape(-1)


def hyperboloid_series(r: float, eps: float, alpha: complex, terms: int = 80) -> float:
    """``eps e^{-|a|^2} sum_n (sqrt(r^2+3/2+n) - sqrt(r^2+1/2+n)) |a|^{2n} / n!``."""
    k = np.arange(terms)
    a2 = abs(alpha) ** 2
    from scipy.special import gammaln

    logw = -a2 + (k * np.log(a2) if a2 > 0 else np.where(k == 0, 0.0, -np.inf)) - gammaln(k + 1)
    return float(eps * np.sum(np.exp(logw) * (np.sqrt(r * r + 1.5 + k) - np.sqrt(r * r + 0.5 + k))))


def paralinkable_data(fs: FuzzySpace, alpha: complex, beta: complex | None = None) -> dict:
    """Paralinkable displacement pair of the hyperboloid and the path statistics.

    ``W = sqrt(2) (a - beta) N_beta^+ (D X^3 D^+ - X^3)`` with ``D = D(beta - alpha)``
    and ``D^pm = exp(i Im(alpha conj(beta))) exp(pm W) D``.  ``p_plus``,
    ``p_minus``, ``coherence`` and ``linear_entropy`` are the first-order series
    at ``alpha``; the ``*_state`` entries are read off the actual quasicoherent
    state at the self-consistent point over ``alpha``.
    """
    if fs.model_tag is not ModelTag.HYPERBOLOID:
        raise NotLinkable("paralinkable pairs are implemented for the hyperboloid")
    alpha = complex(alpha)
    if abs(alpha) < 1e-12:
        raise NotLinkable("the hyperboloid is not paralinkable at alpha = 0")
    beta = alpha if beta is None else complex(beta)
    n = fs.hilbert_dim
    eps = float(fs.params["epsilon"])
    r = float(fs.params.get("r", 1.0))
    a = annihilation(n)
    x3 = fs.x(2)
    delta = beta - alpha
    dop = weyl_operator(n, delta)
    w_op = np.sqrt(2) * (a - beta * np.eye(n)) @ _shifted_number_pinv(n, beta) @ (dop @ x3 @ dop.conj().T - x3)
    phase = np.exp(1j * np.imag(alpha * np.conj(beta)))
    d_plus = phase * expm(w_op) @ dop
    d_minus = phase * expm(-w_op) @ dop

    step = weyl_generator(n, delta)
    comm = 1j * step  # delta a^+ - conj(delta) a
    dw = np.sqrt(2) * (a - alpha * np.eye(n)) @ _shifted_number_pinv(n, alpha) @ (comm @ x3 - x3 @ comm)
    gen_plus = step - 1j * dw
    gen_minus = step + 1j * dw

    s = hyperboloid_series(r, eps, alpha)
    p_plus = 0.5 - s * alpha.real
    p_minus = 1.0 - p_plus
    coherence = 0.5 - s * alpha.imag
    lin = 2 * s * alpha.imag

    from .manifold import line_root

    seed = np.array([alpha.real, alpha.imag, eps * np.sqrt(r * r + 0.5 + abs(alpha) ** 2)])
    qc = line_root(fs, seed, [0.0, 0.0, 1.0], solve_qc(fs, seed).amps)
    bpm = PLUS_MINUS.conj().T @ qc.amps.reshape(2, -1)
    rho_pm = bpm @ bpm.conj().T
    return {
        "D_plus": d_plus,
        "D_minus": d_minus,
        "W": w_op,
        "generator_plus": gen_plus,
        "generator_minus": gen_minus,
        "p_plus": p_plus,
        "p_minus": p_minus,
        "coherence": coherence,
        "linear_entropy": lin,
        "p_plus_state": float(rho_pm[0, 0].real),
        "p_minus_state": float(rho_pm[1, 1].real),
        "coherence_state": complex(rho_pm[0, 1]),
        "linear_entropy_state": float(1 - np.real(np.trace(rho_pm @ rho_pm))),
        "qc": qc,
    }


def paralinkable_distance(fs: FuzzySpace, psi: np.ndarray, d: Displacement, *, off: bool = False) -> dict:
    """Block form of the quantum distance for a paralinkable pair.

    ``G_{ab} = sum_i l^a_i l^b_i`` with ``l^a_i = -i[dPi^a, X^i]`` (``a`` over
    ``+, -``) is symmetrised before the square root; the norm of its
    anti-Hermitian part is returned as ``asymmetry``.  The symmetrised
    block is not positive in general; its negative eigenvalues are clamped and
    their weighted contribution is returned as ``negative_part``.
    """
    gens = d.generator
    ells = [[-1j * (g @ fs.x(i) - fs.x(i) @ g) for i in range(3)] for g in gens]
    n = fs.hilbert_dim
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    for p in range(2):
        for q in range(2):
            big[p * n : (p + 1) * n, q * n : (q + 1) * n] = sum(ells[p][i] @ ells[q][i] for i in range(3))
    asym = float(np.linalg.norm(big - big.conj().T) / 2)
    herm = 0.5 * (big + big.conj().T)
    if off:
        herm[:n, n:] = 0
        herm[n:, :n] = 0
    bpm = (PLUS_MINUS.conj().T @ psi.reshape(2, -1)).reshape(-1)
    dist, neg = _compressed_expectation(herm, bpm, low_tail_levels(fs, 2), strict=False)
    return {"distance": dist, "asymmetry": asym, "negative_part": neg}
