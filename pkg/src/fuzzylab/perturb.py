"""First-order perturbation of the eigenmanifold under ``X^i -> X^i + delta X^i``."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .opcore import SIGMA, FuzzySpace, as_matrix, dirac_matrix, fock_tail_weight
from .qcstate import TOL_DEG, DegeneracyClass, QcState, apply_sigma, eigensystem

ZERO_DIRECTION_TOL = 1e-12
TANGENT_TOL = 1e-8
GHOST_TAIL = 0.5


class PerturbationError(ValueError):
    pass


class PerturbationFlag(str, enum.Enum):
    ZERO_DIRECTION = "zero_direction"
    GAP_CONDITION = "gap_condition"
    U_STAR_CHOICE = "u_star_choice"
    U_STAR_INCONSISTENT = "u_star_inconsistent"


@dataclass(frozen=True, eq=False)
class PerturbationResult:
    """First-order shift ``delta_x`` of a manifold point and the corrected state.

    ``validity`` is the local perturbation strength ``||sigma.(dX - dx) Lambda||``
    divided by the spectral gap; first order is trustworthy when it is small.
    """

    delta_x: np.ndarray
    perturbed_state: np.ndarray
    direction: np.ndarray
    validity: float
    flags: tuple[PerturbationFlag, ...] = ()
    eigenvalue_matrix: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def _as_ops(fs: FuzzySpace, delta_x_ops) -> list[np.ndarray]:
    n = fs.z.shape[0]
    ops = []
    for op in delta_x_ops:
        m = np.zeros((n, n), dtype=complex) if op is None else np.asarray(as_matrix(op), dtype=complex)
        if m.shape != (n, n):
            raise PerturbationError(f"perturbation operator has shape {m.shape}, expected {(n, n)}")
        ops.append(m)
    if len(ops) != 3:
        raise PerturbationError("need three perturbation operators")
    return ops


def _apply_orbital(op: np.ndarray, psi: np.ndarray) -> np.ndarray:
    blocks = psi.reshape(2, -1)
    return (blocks @ op.T).reshape(-1)


def _expect_orbital(ops, psi) -> np.ndarray:
    return np.array([np.real(np.vdot(psi, _apply_orbital(o, psi))) for o in ops])


def _sigma_dot(ops, shift, psi) -> np.ndarray:
    """``sum_i (sigma_i (x) (ops_i - shift_i)) psi``."""
    out = np.zeros_like(psi)
    for i in range(3):
        v = _apply_orbital(ops[i], psi) - shift[i] * psi
        out = out + apply_sigma(SIGMA[i], v)
    return out


def _purity(psi) -> np.ndarray:
    return np.array([np.real(np.vdot(psi, apply_sigma(s, psi))) for s in SIGMA])


def _eigen_correction(w, v, null_idx, vec, rhs) -> np.ndarray:
    """``vec - sum_n <lambda_n|rhs>/lambda_n |lambda_n>`` over the non-null pairs."""
    mask = np.ones(len(w), dtype=bool)
    mask[null_idx] = False
    coeff = (v[:, mask].conj().T @ rhs) / w[mask]
    out = vec - v[:, mask] @ coeff
    return out / np.linalg.norm(out)


def _null_indices(w: np.ndarray, lam: float) -> np.ndarray:
    return np.flatnonzero(np.abs(w - lam) <= TOL_DEG)


def _is_ghost(fs: FuzzySpace, vec: np.ndarray, ref: np.ndarray) -> bool:
    """A truncation mode living in the top Fock levels, orthogonal to ``ref``."""
    if not fs.is_plane_family:
        return False
    v = vec - np.vdot(ref, vec) * ref
    nrm = np.linalg.norm(v)
    if nrm < 1e-6:
        return True
    return fock_tail_weight((v / nrm).reshape(2, -1)) > GHOST_TAIL


def _direction(mean: np.ndarray) -> np.ndarray | None:
    nrm = float(np.linalg.norm(mean))
    return None if nrm < ZERO_DIRECTION_TOL else mean / nrm


def perturb_nondegenerate(fs: FuzzySpace, qc: QcState, delta_x_ops) -> PerturbationResult:
    """Shift of a strongly non-degenerate manifold point and its corrected state.

    The direction is ``p = <dX>/|<dX>|``; the size follows from requiring the
    first-order eigenvalue ``<Lambda|sigma.(dX - dx)|Lambda>`` to vanish, so
    ``dx = <sigma.dX>/(p.n) p``.  The state is corrected with the full
    eigendecomposition of ``D_x``.
    """
    ops = _as_ops(fs, delta_x_ops)
    psi = qc.amps
    w, v = eigensystem(fs, qc.x)
    null = _null_indices(w, qc.lambda0)
    if qc.degeneracy is not DegeneracyClass.STRONGLY_NONDEGENERATE:
        extra = [c for c in qc.cluster if abs(np.vdot(psi, c)) < 1 - 1e-8]
        if not all(_is_ghost(fs, c, psi) for c in extra):
            raise PerturbationError(f"quasicoherent state is {qc.degeneracy.value}; use perturb_weakly_degenerate")
    mean = _expect_orbital(ops, psi)
    p = _direction(mean)
    flags: list[PerturbationFlag] = []
    if p is None:
        flags.append(PerturbationFlag.ZERO_DIRECTION)
        return PerturbationResult(np.zeros(3), psi.copy(), np.zeros(3), 0.0, tuple(flags))
    n_vec = _purity(psi)
    pn = float(p @ n_vec)
    if abs(pn) < TANGENT_TOL:
        raise PerturbationError(f"perturbation direction is tangent to the manifold (p.n = {pn:.3e}, p = {p})")
    source = float(np.real(np.vdot(psi, _sigma_dot(ops, np.zeros(3), psi))))
    dx = source / pn * p
    rhs = _sigma_dot(ops, dx, psi)
    state = _eigen_correction(w, v, null, psi, rhs)
    gap = qc.gap if np.isfinite(qc.gap) else np.inf
    validity = float(np.linalg.norm(rhs) / gap)
    if validity > 0.1:
        flags.append(PerturbationFlag.GAP_CONDITION)
    return PerturbationResult(dx, state, p, validity, tuple(flags), extras={"p_dot_n": pn})


def _orthonormal(cluster: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.asarray(cluster).T)
    return q.T


def _separable_factor(vec: np.ndarray, tol: float = 1e-6):
    """``(spinor, orbital)`` if ``vec`` is a product state, else ``None``."""
    u, s, vh = np.linalg.svd(vec.reshape(2, -1), full_matrices=False)
    if s[1] > tol * s[0]:
        return None
    return u[:, 0] * s[0], vh[0]


def perturb_weakly_degenerate(fs: FuzzySpace, qc: QcState, delta_x_ops) -> PerturbationResult:
    """Perturbation of a degenerate quasicoherent cluster.

    Separable clusters ``|u> (x) |Omega>`` shift by ``<Omega|dX|Omega>`` and keep
    their degeneracy (the eigenvalue matrix vanishes).  Entangled clusters are
    handled by diagonalising ``<c_k|sigma.dX|c_l>`` over the cluster; each
    eigenvector gives a candidate direction, the ones for which the
    eigenvalue matrix ``<c_k|sigma.(dX - dx)|c_l>`` stays block-diagonal are
    consistent, and among those the candidate with the largest ``|p.n|`` is
    kept (flagged, since the choice is not unique).
    """
    ops = _as_ops(fs, delta_x_ops)
    w, v = eigensystem(fs, qc.x)
    null = _null_indices(w, qc.lambda0)
    basis = _orthonormal(qc.cluster)
    factors = [_separable_factor(c) for c in basis]
    separable = [f is not None for f in factors]
    if any(separable) and not all(separable):
        raise PerturbationError("cluster mixes separable and entangled states; not supported")
    flags: list[PerturbationFlag] = []
    psi = qc.amps

    if all(separable):
        orbital = _separable_factor(psi)
        if orbital is None:
            raise PerturbationError("cluster is separable but the selected state is not")
        spin, omega = orbital
        first = _separable_factor(basis[0])[1]
        if len(basis) > 1 and abs(np.vdot(first, omega)) < 1 - 1e-6:
            raise PerturbationError("cluster states do not share one orbital factor")
        dx = np.array([np.real(np.vdot(omega, o @ omega)) for o in ops])
        spin = spin / np.linalg.norm(spin)
        perp = np.array([-np.conj(spin[1]), np.conj(spin[0])])
        pair = (spin, perp)
        shifted = np.array([np.real(np.vdot(omega, (o - d * np.eye(len(o))) @ omega)) for o, d in zip(ops, dx)])
        lam_mat = np.array(
            [[sum(np.vdot(a, SIGMA[i] @ b) * shifted[i] for i in range(3)) for b in pair] for a in pair]
        )
        p = _direction(dx)
        if p is None:
            flags.append(PerturbationFlag.ZERO_DIRECTION)
            return PerturbationResult(np.zeros(3), psi.copy(), np.zeros(3), 0.0, tuple(flags), lam_mat)
        rhs = _sigma_dot(ops, dx, psi)
        state = _eigen_correction(w, v, null, psi, rhs)
        validity = float(np.linalg.norm(rhs) / qc.gap) if np.isfinite(qc.gap) else 0.0
        if validity > 0.1:
            flags.append(PerturbationFlag.GAP_CONDITION)
        return PerturbationResult(dx, state, p, validity, tuple(flags), lam_mat)

    # entangled cluster
    m = len(basis)
    sig_dx = np.array([[np.vdot(a, _sigma_dot(ops, np.zeros(3), b)) for b in basis] for a in basis])
    sig = np.array([[[np.vdot(a, apply_sigma(SIGMA[i], b)) for b in basis] for a in basis] for i in range(3)])
    _, vecs = np.linalg.eigh(0.5 * (sig_dx + sig_dx.conj().T))
    candidates = []
    for k in range(m):
        cand = vecs[:, k] @ basis
        mean = _expect_orbital(ops, cand)
        p = _direction(mean)
        if p is None:
            continue
        n_vec = _purity(cand)
        pn = float(p @ n_vec)
        if abs(pn) < TANGENT_TOL:
            continue
        src = float(np.real(np.vdot(cand, _sigma_dot(ops, np.zeros(3), cand))))
        dx = src / pn * p
        lam_mat = sig_dx - np.einsum("i,ikl->kl", dx, sig)
        col = lam_mat @ vecs[:, k]
        off = float(np.linalg.norm(col - (vecs[:, k].conj() @ col) * vecs[:, k]))
        candidates.append((off, abs(pn), k, cand, p, dx, lam_mat))
    if not candidates:
        flags.append(PerturbationFlag.ZERO_DIRECTION)
        return PerturbationResult(np.zeros(3), psi.copy(), np.zeros(3), 0.0, tuple(flags), sig_dx)
    scale = max(1.0, float(np.max(np.abs(sig_dx))))
    consistent = [c for c in candidates if c[0] <= 1e-8 * scale]
    if not consistent:
        flags.append(PerturbationFlag.U_STAR_INCONSISTENT)
        consistent = candidates
    if len(consistent) > 1:
        flags.append(PerturbationFlag.U_STAR_CHOICE)
    off, pn, k, cand, p, dx, lam_mat = max(consistent, key=lambda c: c[1])
    rhs = _sigma_dot(ops, dx, cand)
    state = _eigen_correction(w, v, null, cand, rhs)
    validity = float(np.linalg.norm(rhs) / qc.gap) if np.isfinite(qc.gap) else 0.0
    if validity > 0.1:
        flags.append(PerturbationFlag.GAP_CONDITION)
    return PerturbationResult(
        dx, state, p, validity, tuple(flags), lam_mat, extras={"p_dot_n": pn, "off_diagonal": off, "candidate": k}
    )


def perturbed_model(fs: FuzzySpace, delta_x_ops) -> FuzzySpace:
    """The fuzzy space with ``X^i + delta X^i``."""
    ops = _as_ops(fs, delta_x_ops)
    return fs.replace_ops([fs.x(i) + ops[i] for i in range(3)], perturbed=True)


def exact_shift(fs: FuzzySpace, qc: QcState, delta_x_ops, direction=None, *, radius: float = 2.0) -> tuple[np.ndarray, QcState]:
    """Shift of the perturbed manifold along ``direction`` from a dense solve.

    The root of the near-null eigenvalue of the perturbed Dirac operator on the
    line ``x + t p`` (``p`` defaults to the first-order direction).
    """
    from .manifold import line_root

    if direction is None:
        direction = perturb_nondegenerate(fs, qc, delta_x_ops).direction
    direction = np.asarray(direction, dtype=float)
    if np.linalg.norm(direction) == 0:
        return np.zeros(3), qc
    big = perturbed_model(fs, delta_x_ops)
    root = line_root(big, qc.x, direction, previous=qc.amps, radius=radius)
    return root.x - qc.x, root


def first_order_eigenvalue(fs: FuzzySpace, qc: QcState, delta_x_ops, dx) -> float:
    """``<Lambda|sigma.(dX - dx)|Lambda>``, zero for the consistent shift."""
    ops = _as_ops(fs, delta_x_ops)
    return float(np.real(np.vdot(qc.amps, _sigma_dot(ops, np.asarray(dx, float), qc.amps))))


def residual_after_shift(fs: FuzzySpace, delta_x_ops, x, state) -> float:
    """``||(D_{x} + sigma.dX) state||`` on the perturbed model."""
    big = perturbed_model(fs, delta_x_ops)
    return float(np.linalg.norm(dirac_matrix(big, x) @ state))
