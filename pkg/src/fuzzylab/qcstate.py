"""Quasicoherent states and their local quantum data.

The quasicoherent state at ``x`` is the eigenvector of ``D_x`` whose eigenvalue
is closest to zero.  ``x`` lies on the eigenmanifold when that eigenvalue
vanishes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, expm

from .opcore import (
    SIGMA,
    FuzzySpace,
    ModelTag,
    SpinorState,
    coherent_vector,
    dirac_matrix,
    fock_tail_weight,
    spin_matrices,
)

TOL_DEG = 1e-8
TRACK_K = 4


class DegeneracyClass(str, enum.Enum):
    STRONGLY_NONDEGENERATE = "strongly_nondegenerate"
    WEAKLY_DEGENERATE = "weakly_degenerate"
    DEGENERATE = "degenerate"


@dataclass(frozen=True, eq=False)
class QcState:
    """Probe point, near-null eigenpair and its spectral neighbourhood.

    ``cluster`` holds the orthonormal eigenvectors whose eigenvalues lie within
    ``tol_deg`` of ``lambda0`` (one row per vector, ``cluster[0]`` spans the chosen
    state when the cluster is one-dimensional).  ``gap`` is the distance from
    ``lambda0`` to the nearest eigenvalue outside that cluster.
    """

    x: np.ndarray
    lambda0: float
    state: SpinorState
    gap: float
    degeneracy: DegeneracyClass
    cluster_size: int
    cluster: np.ndarray
    residual: float

    @property
    def amps(self) -> np.ndarray:
        return self.state.amps

    @property
    def on_manifold(self) -> bool:
        return abs(self.lambda0) <= 1e-6


@dataclass(frozen=True)
class LocalQuantumData:
    mean_x: np.ndarray
    sigma_x: np.ndarray
    n_vec: np.ndarray
    rho: np.ndarray
    p0: float
    p1: float
    coherence: complex
    linear_entropy: float
    tail_weight: float

    @property
    def purity(self) -> float:
        return float(np.linalg.norm(self.n_vec))


def sphere_rotation(j: float, theta: float, phi: float) -> np.ndarray:
    """``exp(i theta m.J)`` with ``m = (sin phi, -cos phi, 0)``; maps ``|j,j>`` to ``|zeta>_j``."""
    jx, jy, _ = spin_matrices(j)
    return expm(1j * theta * (np.sin(phi) * jx - np.cos(phi) * jy))


def sphere_angles(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[0], x[1])
    return float(np.arctan2(rho, x[2])), float(np.arctan2(x[1], x[0])) if rho > 0 else 0.0


def reference_spinor(fs: FuzzySpace, x) -> np.ndarray | None:
    """Model-specific gauge reference, or ``None`` when the model has none."""
    x = np.asarray(x, dtype=float)
    n = fs.hilbert_dim
    up = np.array([1.0, 0.0], dtype=complex)
    if fs.is_plane_family:
        return np.kron(up, coherent_vector(complex(x[0], x[1]), n))
    if fs.model_tag is ModelTag.FUZZY_SPHERE:
        j = float(fs.params["j"])
        theta, phi = sphere_angles(x)
        halfspin = sphere_rotation(0.5, theta, phi)[:, 0]
        top = np.zeros(n, dtype=complex)
        top[0] = 1.0
        return np.kron(halfspin, sphere_rotation(j, theta, phi) @ top)
    if fs.model_tag is ModelTag.FUZZY_CIRCLE:
        ang = np.arctan2(x[1], x[0])
        return np.kron(up, np.exp(1j * ang * np.arange(n)) / np.sqrt(n))
    return None


def fix_gauge(vec: np.ndarray, reference: np.ndarray | None = None) -> np.ndarray:
    """Multiply by a unit phase making the overlap with ``reference`` real positive.

    Falls back to making the largest-magnitude amplitude real positive when no
    reference is given or the overlap is too small to fix a phase reliably.
    """
    if reference is not None:
        ov = np.vdot(reference, vec)
        if abs(ov) > 1e-3:
            return vec * (abs(ov) / ov)
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


def align_phase(vec: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Rephase ``vec`` so that ``<target|vec>`` is real positive."""
    ov = np.vdot(target, vec)
    if ov == 0:
        return vec
    return vec * (abs(ov) / ov)


def _spin_only_related(cluster: np.ndarray, tol: float = 1e-6) -> bool:
    """True when every cluster vector is ``(u (x) 1)`` applied to the first one.

    Equivalent to all 2 x n reshaped vectors sharing the row space of the first.
    """
    first = cluster[0].reshape(2, -1)
    _, s, vh = np.linalg.svd(first, full_matrices=False)
    rank = int(np.sum(s > tol * max(s[0], 1e-300)))
    basis = vh[:rank]
    if len(cluster) > 2 * rank:
        return False
    for vec in cluster[1:]:
        m = vec.reshape(2, -1)
        proj = m @ basis.conj().T @ basis
        if np.linalg.norm(m - proj) > tol:
            return False
    return True


def classify(cluster: np.ndarray) -> DegeneracyClass:
    if len(cluster) == 1:
        return DegeneracyClass.STRONGLY_NONDEGENERATE
    if _spin_only_related(cluster):
        return DegeneracyClass.WEAKLY_DEGENERATE
    return DegeneracyClass.DEGENERATE


def eigensystem(fs: FuzzySpace, x) -> tuple[np.ndarray, np.ndarray]:
    """Full Hermitian eigendecomposition of ``D_x`` (ascending eigenvalues)."""
    return np.linalg.eigh(dirac_matrix(fs, x))


WINDOW_MIN_DIM = 96


def near_null_eigensystem(
    fs: FuzzySpace, x, count: int = TRACK_K + 1, width: float = 2.0
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``D_x`` in a window around zero holding at least ``count`` values.

    The window is widened until the nearest eigenvalue to the near-null one is
    guaranteed to lie inside it, so ``solve_qc`` reports the same gap as with the
    full decomposition.  Small problems fall back to the full solve.
    """
    d = dirac_matrix(fs, x)
    if d.shape[0] < WINDOW_MIN_DIM:
        return np.linalg.eigh(d)
    bound = float(np.max(np.sum(np.abs(d), axis=1)))
    while width < bound:
        w, v = eigh(d, subset_by_value=(-width, width), driver="evr")
        if w.size >= count:
            lam = w[np.argmin(np.abs(w))]
            dist = np.abs(w - lam)
            gap = np.min(dist[dist > TOL_DEG], initial=np.inf)
            # anything outside the window is at least width - |lam| away
            if gap <= width - abs(lam):
                return w, v
        width *= 2.0
    return np.linalg.eigh(d)


def solve_qc(
    fs: FuzzySpace,
    x,
    *,
    previous: np.ndarray | None = None,
    reference: np.ndarray | None | bool = True,
    tol_deg: float = TOL_DEG,
    track_k: int = TRACK_K,
    eig: tuple[np.ndarray, np.ndarray] | None = None,
    fast: bool = False,
) -> QcState:
    """Quasicoherent state of ``fs`` at ``x``.

    With ``previous`` given, the eigenpair is picked among the ``track_k``
    eigenvalues nearest zero by maximal overlap with ``previous`` and its
    phase is aligned to it.  Otherwise the eigenvalue of smallest magnitude is
    used and the phase is fixed against the model reference spinor
    (``reference=True``), an explicit spinor, or the largest amplitude
    (``reference=None``).  ``fast`` restricts the eigensolve to a window around
    zero (same selection and gap, fewer eigenpairs computed).
    """
    x = np.array(x, dtype=float)
    if eig is None:
        eig = near_null_eigensystem(fs, x, track_k + 1) if fast else eigensystem(fs, x)
    w, v = eig
    order = np.argsort(np.abs(w))
    i0 = int(order[0])
    if previous is not None:
        cand = order[: max(1, min(track_k, len(w)))]
        scores = np.abs(v[:, cand].conj().T @ previous)
        i0 = int(cand[int(np.argmax(scores))])
    lam = float(w[i0])
    in_cluster = np.abs(w - lam) <= tol_deg
    idx = np.flatnonzero(in_cluster)
    cluster = v[:, idx].T.copy()
    outside = w[~in_cluster]
    gap = float(np.min(np.abs(outside - lam))) if outside.size else np.inf

    ref = reference_spinor(fs, x) if reference is True else (None if reference is False else reference)
    if len(idx) > 1:
        anchor = previous if previous is not None else ref
        if anchor is not None:
            coeffs = cluster.conj() @ anchor
            if np.linalg.norm(coeffs) > 1e-8:
                vec = coeffs @ cluster
                vec = vec / np.linalg.norm(vec)
            else:
                vec = v[:, i0]
        else:
            vec = v[:, i0]
    else:
        vec = v[:, i0]
    if previous is not None:
        vec = align_phase(vec, previous)
    else:
        vec = fix_gauge(vec, ref)
    d = dirac_matrix(fs, x)
    residual = float(np.linalg.norm(d @ vec - lam * vec))
    return QcState(
        x=x,
        lambda0=lam,
        state=SpinorState(vec),
        gap=gap,
        degeneracy=classify(cluster),
        cluster_size=len(idx),
        cluster=cluster,
        residual=residual,
    )


def spin_density(vec: np.ndarray) -> np.ndarray:
    """Partial trace over ``H``: ``rho[s, t] = <Lambda_t|Lambda_s>``."""
    m = np.asarray(vec).reshape(2, -1)
    return m @ m.conj().T


def local_data(fs: FuzzySpace, qc: QcState | np.ndarray) -> LocalQuantumData:
    """Mean coordinates, uncertainties and spin density matrix of a state."""
    vec = qc.amps if isinstance(qc, QcState) else np.asarray(qc)
    nrm = np.linalg.norm(vec)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"state is not normalised (norm {nrm:.3e})")
    blocks = vec.reshape(2, -1)
    means = np.empty(3)
    sig = np.empty(3)
    for i in range(3):
        xi = fs.x(i)
        applied = blocks @ xi.T
        m1 = float(np.real(np.vdot(blocks, applied)))
        m2 = float(np.real(np.vdot(applied, applied)))
        means[i] = m1
        sig[i] = np.sqrt(max(m2 - m1 * m1, 0.0))
    rho = spin_density(vec)
    n_vec = np.array([np.real(np.trace(rho @ s)) for s in SIGMA])
    p0, p1 = float(rho[0, 0].real), float(rho[1, 1].real)
    lin = float(1.0 - np.real(np.trace(rho @ rho)))
    return LocalQuantumData(
        mean_x=means,
        sigma_x=sig,
        n_vec=n_vec,
        rho=rho,
        p0=p0,
        p1=p1,
        coherence=complex(rho[0, 1]),
        linear_entropy=lin,
        tail_weight=fock_tail_weight(blocks) if fs.is_plane_family else 0.0,
    )


def normal_vector_check(fs: FuzzySpace, qc: QcState, tangents) -> float:
    """Largest ``|n . t|`` over the given tangents (each normalised first)."""
    n_vec = local_data(fs, qc).n_vec
    worst = 0.0
    for t in tangents:
        t = np.asarray(t, dtype=float)
        worst = max(worst, abs(float(n_vec @ t)) / float(np.linalg.norm(t)))
    return worst


def nontrivial_normal_rank(fs: FuzzySpace, qc: QcState, tol: float = 1e-8) -> int:
    """Rank of the purity normal vectors spanned by a degenerate cluster."""
    normals = [local_data(fs, vec).n_vec for vec in qc.cluster]
    s = np.linalg.svd(np.atleast_2d(normals), compute_uv=False)
    return int(np.sum(s > tol))


def apply_sigma(sigma: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """``(sigma (x) 1) psi`` for spinors stored flat along the last axis."""
    blocks = psi.reshape(psi.shape[:-1] + (2, -1))
    return np.einsum("st,...tn->...sn", sigma, blocks).reshape(psi.shape)


def apply_dirac(fs: FuzzySpace, x: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """``D_x psi`` batched over leading axes of ``x`` (``[..., 3]``) and ``psi``."""
    x = np.asarray(x, dtype=float)
    blocks = psi.reshape(psi.shape[:-1] + (2, -1))
    out = np.zeros_like(blocks)
    for i in range(3):
        shifted = blocks @ fs.x(i).T - x[..., i, None, None] * blocks
        out += np.einsum("st,...tn->...sn", SIGMA[i], shifted)
    return out.reshape(psi.shape)
