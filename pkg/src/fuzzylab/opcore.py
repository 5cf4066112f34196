"""Operator algebra on truncated Hilbert spaces and the catalog of fuzzy spaces.

A fuzzy space is a triple of Hermitian coordinate operators ``X^1, X^2, X^3``
acting on a finite Hilbert space ``H``.  Its Dirac operator at a probe point
``x`` of R^3 is ``D_x = sigma_i (x) (X^i - x^i)`` on ``C^2 (x) H``.  Spinors are
stored spin-major: the first ``n`` amplitudes are the spin-up block, the next
``n`` the spin-down block.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.special import gammaln

HERMITIAN_RTOL = 1e-12

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class ConstructionError(ValueError):
    """Raised when operators or models cannot be built from the inputs."""


def _hermitian_defect(m: np.ndarray) -> float:
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T))) / scale


@dataclass(frozen=True, eq=False)
class Operator:
    """Immutable dense complex square matrix.

    ``hermitian_hint`` caches the Hermiticity check performed at construction
    (relative tolerance 1e-12 on the largest entry).
    """

    entries: np.ndarray
    hermitian_hint: bool = field(default=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConstructionError(f"operator must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "hermitian_hint", _hermitian_defect(m) <= HERMITIAN_RTOL)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries @ other.entries)

    def __add__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries - other.entries)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(scalar * self.entries)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(-self.entries)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def expectation(self, vec: np.ndarray) -> complex:
        return complex(np.vdot(vec, self.entries @ vec))

    @classmethod
    def identity(cls, n: int) -> "Operator":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, n: int) -> "Operator":
        return cls(np.zeros((n, n)))


def _check_dims(a: Operator, b: Operator) -> None:
    if a.dim != b.dim:
        raise ConstructionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def commutator(a: Operator, b: Operator) -> Operator:
    """Return ``ab - ba``."""
    _check_dims(a, b)
    return Operator(a.entries @ b.entries - b.entries @ a.entries)


def as_matrix(op) -> np.ndarray:
    return op.entries if isinstance(op, Operator) else np.asarray(op, dtype=complex)


# Fock space and spin building blocks


def annihilation(n: int) -> np.ndarray:
    """Truncated annihilation operator on levels ``0..n-1``."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def creation(n: int) -> np.ndarray:
    return annihilation(n).conj().T


def number_op(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def spin_matrices(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-j generators in the basis ``|j, m>`` ordered ``m = j, j-1, ..., -j``."""
    dim = int(round(2 * j)) + 1
    if dim < 1 or abs(2 * j - (dim - 1)) > 1e-12:
        raise ConstructionError(f"j must be a non-negative half-integer, got {j}")
    m = j - np.arange(dim)
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1)), raising moves one slot up
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    jm = jp.conj().T
    return (jp + jm) / 2, (jp - jm) / 2j, np.diag(m).astype(complex)


def coherent_vector(alpha: complex, n: int) -> np.ndarray:
    """Glauber coherent state truncated to ``n`` levels and renormalised."""
    v = np.zeros(n, dtype=complex)
    if alpha == 0:
        v[0] = 1.0
        return v
    k = np.arange(n)
    logmag = k * np.log(abs(alpha)) - 0.5 * gammaln(k + 1)
    v = np.exp(logmag - logmag.max() + 1j * k * np.angle(alpha))
    return v / np.linalg.norm(v)


def fock_tail_weight(block: np.ndarray, top: int = 6) -> float:
    """Weight of a Fock-space vector (or stack of vectors) on its top levels."""
    block = np.atleast_2d(block)
    return float(np.sum(np.abs(block[..., -top:]) ** 2))


# Catalog


class ModelTag(str, enum.Enum):
    FUZZY_SPHERE = "fuzzy_sphere"
    FUZZY_PLANE = "fuzzy_plane"
    ELLIPTIC_PARABOLOID = "elliptic_paraboloid"
    HYPERBOLIC_PARABOLOID = "hyperbolic_paraboloid"
    HYPERBOLOID = "hyperboloid"
    FLAMM_PARABOLOID = "flamm_paraboloid"
    FUZZY_CIRCLE = "fuzzy_circle"


PLANE_FAMILY = frozenset(
    {
        ModelTag.FUZZY_PLANE,
        ModelTag.ELLIPTIC_PARABOLOID,
        ModelTag.HYPERBOLIC_PARABOLOID,
        ModelTag.HYPERBOLOID,
        ModelTag.FLAMM_PARABOLOID,
    }
)

# required parameters and defaults for optional ones
MODEL_CATALOG: Mapping[ModelTag, Mapping[str, object]] = MappingProxyType(
    {
        ModelTag.FUZZY_SPHERE: {"required": ("j", "r"), "defaults": {}, "about": "X^i = r J^i, spin-j irrep"},
        ModelTag.FUZZY_PLANE: {"required": ("fock_dim",), "defaults": {}, "about": "Z = a, X^3 = 0"},
        ModelTag.ELLIPTIC_PARABOLOID: {
            "required": ("fock_dim", "epsilon"),
            "defaults": {},
            "about": "Z = a, X^3 = eps (a+a + 1/2)",
        },
        ModelTag.HYPERBOLIC_PARABOLOID: {
            "required": ("fock_dim", "epsilon"),
            "defaults": {},
            "about": "Z = a, X^3 = (eps/2)(a^2 + a+^2)",
        },
        ModelTag.HYPERBOLOID: {
            "required": ("fock_dim", "epsilon"),
            "defaults": {"r": 1.0},
            "about": "Z = a, X^3 = eps diag sqrt(r^2 + 1/2 + n)",
        },
        ModelTag.FLAMM_PARABOLOID: {
            "required": ("fock_dim", "r_s"),
            "defaults": {},
            "about": "Z = a, X^3 = 2 sqrt(r_s) diag sqrt(sqrt(n) - r_s)",
        },
        ModelTag.FUZZY_CIRCLE: {
            "required": ("N",),
            "defaults": {"epsilon": 0.0},
            "about": "Z = cyclic shift, X^3 = eps N",
        },
    }
)


@dataclass(frozen=True, eq=False)
class FuzzySpace:
    """Three Hermitian coordinate operators plus model metadata."""

    x_ops: tuple[Operator, Operator, Operator]
    model_tag: ModelTag | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        ops = tuple(o if isinstance(o, Operator) else Operator(o) for o in self.x_ops)
        if len(ops) != 3:
            raise ConstructionError("a fuzzy space needs exactly three coordinate operators")
        dims = {o.dim for o in ops}
        if len(dims) != 1:
            raise ConstructionError(f"coordinate operators have mismatched dims {sorted(dims)}")
        for i, o in enumerate(ops):
            if not o.hermitian_hint:
                raise ConstructionError(f"X^{i + 1} is not Hermitian")
        object.__setattr__(self, "x_ops", ops)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))
        z = ops[0].entries + 1j * ops[1].entries
        z.setflags(write=False)
        object.__setattr__(self, "_z", z)

    @property
    def hilbert_dim(self) -> int:
        return self.x_ops[0].dim

    @property
    def z(self) -> np.ndarray:
        """``Z = X^1 + i X^2``."""
        return self._z

    def x(self, i: int) -> np.ndarray:
        return self.x_ops[i].entries

    @property
    def is_plane_family(self) -> bool:
        return self.model_tag in PLANE_FAMILY

    def replace_ops(self, ops, **metadata) -> "FuzzySpace":
        md = dict(self.metadata)
        md.update(metadata)
        return FuzzySpace(tuple(ops), self.model_tag, self.params, md)


def dirac_matrix(fs: FuzzySpace, x) -> np.ndarray:
    """Dense ``D_x`` as a plain array (hot path for eigensolves)."""
    x = np.asarray(x, dtype=float)
    n = fs.hilbert_dim
    eye = np.eye(n)
    z = x[0] + 1j * x[1]
    d3 = fs.x(2) - x[2] * eye
    lower = fs.z - z * eye
    out = np.empty((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = d3
    out[:n, n:] = lower.conj().T
    out[n:, :n] = lower
    out[n:, n:] = -d3
    return out


def dirac_operator(fs: FuzzySpace, x) -> Operator:
    """``D_x = sigma_i (x) (X^i - x^i)`` as a ``2n x 2n`` Hermitian Operator."""
    return Operator(dirac_matrix(fs, x))


def spin_op(sigma: np.ndarray, op: np.ndarray) -> np.ndarray:
    """Kronecker product in the spin-major layout."""
    return np.kron(sigma, op)


@dataclass(frozen=True, eq=False)
class SpinorState:
    """Element of ``C^2 (x) H`` in spin-major layout."""

    amps: np.ndarray

    def __post_init__(self):
        a = np.array(self.amps, dtype=complex, copy=True).ravel()
        if a.size % 2:
            raise ConstructionError("spinor length must be even")
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @property
    def dim(self) -> int:
        return self.amps.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def blocks(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.dim // 2
        return self.amps[:n], self.amps[n:]

    def normalized(self) -> "SpinorState":
        nrm = self.norm
        if nrm == 0:
            raise ConstructionError("cannot normalise the zero spinor")
        return SpinorState(self.amps / nrm)

    def overlap(self, other: "SpinorState") -> complex:
        return complex(np.vdot(self.amps, other.amps))

    def as_matrix(self) -> np.ndarray:
        """Row ``s`` holds the ``H`` component along spin basis vector ``s``."""
        return self.amps.reshape(2, -1)


def _need(tag: ModelTag, params: Mapping[str, float]) -> dict:
    spec = MODEL_CATALOG[tag]
    out = dict(spec["defaults"])
    out.update(params)
    missing = [k for k in spec["required"] if k not in out]
    if missing:
        raise ConstructionError(f"model {tag.value} is missing parameters {missing}")
    return out


def _fock_dim(p: dict) -> int:
    n = int(p["fock_dim"])
    if n < 1 or n != p["fock_dim"]:
        raise ConstructionError(f"fock_dim must be a positive integer, got {p['fock_dim']}")
    return n


def build_model(tag, params: Mapping[str, float] | None = None) -> FuzzySpace:
    """Construct a catalog fuzzy space from its tag and parameters."""
    try:
        tag = ModelTag(tag)
    except ValueError:
        raise ConstructionError(f"unknown model {tag!r}") from None
    p = _need(tag, params or {})
    metadata: dict[str, object] = {}

    if tag is ModelTag.FUZZY_SPHERE:
        j, r = float(p["j"]), float(p["r"])
        if r <= 0:
            raise ConstructionError("sphere radius parameter r must be positive")
        jx, jy, jz = spin_matrices(j)
        ops = (r * jx, r * jy, r * jz)
        cas = sum(o @ o for o in ops)
        expected = r * r * j * (j + 1)
        if np.max(np.abs(cas - expected * np.eye(len(cas)))) > 1e-12 * max(expected, 1.0):
            raise ConstructionError("Casimir identity violated")
        return FuzzySpace(ops, tag, p, metadata)

    if tag is ModelTag.FUZZY_CIRCLE:
        n = int(p["N"])
        if n < 1 or n != p["N"]:
            raise ConstructionError("N must be a positive integer")
        zmat = np.roll(np.eye(n), 1, axis=1).astype(complex)  # sum |k><k+1|, cyclic
        x1 = (zmat + zmat.conj().T) / 2
        x2 = (zmat - zmat.conj().T) / 2j
        x3 = float(p["epsilon"]) * number_op(n)
        if np.max(np.abs(x1 @ x2 - x2 @ x1)) > 1e-12:
            raise ConstructionError("circle coordinates failed to commute")
        return FuzzySpace((x1, x2, x3), tag, p, metadata)

    n = _fock_dim(p)
    a = annihilation(n)
    ad = a.conj().T
    x1 = (a + ad) / 2
    x2 = (a - ad) / 2j
    if tag is ModelTag.FUZZY_PLANE:
        x3 = np.zeros((n, n), dtype=complex)
    elif tag is ModelTag.ELLIPTIC_PARABOLOID:
        x3 = float(p["epsilon"]) * (ad @ a + 0.5 * np.eye(n))
    elif tag is ModelTag.HYPERBOLIC_PARABOLOID:
        x3 = 0.5 * float(p["epsilon"]) * (a @ a + ad @ ad)
    elif tag is ModelTag.HYPERBOLOID:
        r = float(p["r"])
        x3 = float(p["epsilon"]) * np.diag(np.sqrt(r * r + 0.5 + np.arange(n))).astype(complex)
    elif tag is ModelTag.FLAMM_PARABOLOID:
        rs = float(p["r_s"])
        if rs < 0:
            raise ConstructionError("r_s must be non-negative")
        inner = np.sqrt(np.arange(n)) - rs
        masked = np.flatnonzero(inner < 0)
        metadata["masked_levels"] = tuple(int(k) for k in masked)
        x3 = 2 * np.sqrt(rs) * np.diag(np.sqrt(np.clip(inner, 0.0, None))).astype(complex)
    else:  # pragma: no cover - enum is exhaustive
        raise ConstructionError(f"unhandled model {tag}")
    return FuzzySpace((x1, x2, x3), tag, p, metadata)
