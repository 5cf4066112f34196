"""Time-dependent fuzzy spaces and the induced flow on the eigenmanifold."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .opcore import SIGMA, FuzzySpace, ModelTag, as_matrix, number_op
from .perturb import _apply_orbital, _expect_orbital, _purity, _sigma_dot
from .qcstate import QcState, local_data, solve_qc

MEMBERSHIP_TOL = 1e-5
ZERO_VELOCITY_TOL = 1e-12
SEPARABLE_TOL = 1e-10


class DynamicsError(ValueError):
    pass


class DriverKind(str, enum.Enum):
    HEISENBERG = "heisenberg"
    ROTATION = "rotation"
    EXPANSION = "expansion"


@dataclass(frozen=True, eq=False)
class HeisenbergHamiltonian:
    """Environment Hamiltonian ``H_E``; ``X(t) = U^+ X U`` with ``U = exp(-i H_E t)``."""

    H: np.ndarray
    kind: DriverKind = field(default=DriverKind.HEISENBERG, init=False)

    def __post_init__(self):
        h = np.asarray(as_matrix(self.H), dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise DynamicsError("H_E must be a square matrix")
        if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(h), initial=0.0))):
            raise DynamicsError("H_E is not Hermitian")
        object.__setattr__(self, "H", h)
        w, v = np.linalg.eigh(h)
        object.__setattr__(self, "_eig", (w, v))

    def unitary(self, t: float) -> np.ndarray:
        w, v = self._eig
        return (v * np.exp(-1j * w * t)) @ v.conj().T


@dataclass(frozen=True, eq=False)
class RotationSO3:
    """Rigid rotation of the coordinates: ``X^i(t) = J(t)^i_j X^j(0)``."""

    axis: np.ndarray
    omega: float
    kind: DriverKind = field(default=DriverKind.ROTATION, init=False)

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        if ax.shape != (3,) or abs(np.linalg.norm(ax) - 1.0) > 1e-12:
            raise DynamicsError(f"rotation axis must be a unit 3-vector, got {self.axis}")
        object.__setattr__(self, "axis", ax)

    def generator(self) -> np.ndarray:
        """``[n x]``, so that ``J(t) = exp(omega t [n x])``."""
        n = self.axis
        return np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])

    def matrix(self, t: float) -> np.ndarray:
        k = self.generator()
        th = self.omega * t
        return np.eye(3) + np.sin(th) * k + (1.0 - np.cos(th)) * (k @ k)


@dataclass(frozen=True, eq=False)
class Expansion:
    """Uniform expansion ``X^i(t) = (v t + 1) X^i(0)``."""

    v: float
    kind: DriverKind = field(default=DriverKind.EXPANSION, init=False)

    def scale(self, t: float) -> float:
        return self.v * t + 1.0


Driver = HeisenbergHamiltonian | RotationSO3 | Expansion


@dataclass(frozen=True, eq=False)
class TimeDependentModel:
    base: FuzzySpace
    driver: Driver
    t: float = 0.0

    def __post_init__(self):
        if isinstance(self.driver, HeisenbergHamiltonian) and self.driver.H.shape != self.base.z.shape:
            raise DynamicsError(f"H_E has shape {self.driver.H.shape}, model operators {self.base.z.shape}")


def heisenberg_number(fs: FuzzySpace, omega: float) -> HeisenbergHamiltonian:
    """``H_E = omega a^+ a`` on a plane-family model."""
    return HeisenbergHamiltonian(omega * number_op(fs.z.shape[0]))


def evolve_ops(tdm: TimeDependentModel, t: float) -> FuzzySpace:
    """The model operators at time ``t``."""
    fs, drv = tdm.base, tdm.driver
    ops = [fs.x(i) for i in range(3)]
    if isinstance(drv, HeisenbergHamiltonian):
        u = drv.unitary(t)
        new = [u.conj().T @ x @ u for x in ops]
    elif isinstance(drv, RotationSO3):
        j = drv.matrix(t)
        new = [sum(j[i, k] * ops[k] for k in range(3)) for i in range(3)]
    elif isinstance(drv, Expansion):
        new = [drv.scale(t) * x for x in ops]
    else:
        raise DynamicsError(f"unknown driver {drv!r}")
    return fs.replace_ops(new, time=float(t))


def velocity_ops(tdm: TimeDependentModel, t: float) -> list[np.ndarray]:
    """``dX^i/dt`` at time ``t``."""
    drv = tdm.driver
    if isinstance(drv, HeisenbergHamiltonian):
        cur = evolve_ops(tdm, t)
        h = drv.H
        return [1j * (h @ cur.x(i) - cur.x(i) @ h) for i in range(3)]
    if isinstance(drv, RotationSO3):
        cur = evolve_ops(tdm, t)
        k = drv.omega * drv.generator()
        return [sum(k[i, m] * cur.x(m) for m in range(3)) for i in range(3)]
    if isinstance(drv, Expansion):
        return [drv.v * tdm.base.x(i) for i in range(3)]
    raise DynamicsError(f"unknown driver {drv!r}")


@dataclass(frozen=True, eq=False)
class FlowVelocity:
    xdot: np.ndarray
    separable: bool
    zero: bool
    qc: QcState


def flow_velocity(tdm: TimeDependentModel, x, t: float, previous: np.ndarray | None = None) -> FlowVelocity:
    """Velocity of the manifold point carried by the time dependence.

    Separable states move with ``<Omega|dX/dt|Omega>``; entangled ones along
    ``p = <dX/dt>/|<dX/dt>|`` at the rate fixed by keeping the
    near-null eigenvalue at zero, ``<sigma.dX/dt>/(n.p)``.
    """
    fs = evolve_ops(tdm, t)
    qc = solve_qc(fs, x, previous=previous)
    vel = velocity_ops(tdm, t)
    psi = qc.amps
    mean = _expect_orbital(vel, psi)
    separable = local_data(fs, qc).linear_entropy < SEPARABLE_TOL
    nrm = float(np.linalg.norm(mean))
    if nrm < ZERO_VELOCITY_TOL:
        return FlowVelocity(np.zeros(3), separable, True, qc)
    if separable:
        return FlowVelocity(mean, True, False, qc)
    p = mean / nrm
    pn = float(p @ _purity(psi))
    if abs(pn) < 1e-8:
        raise DynamicsError(f"flow direction tangent to the manifold at {x} (n.p = {pn:.3e})")
    src = float(np.real(np.vdot(psi, _sigma_dot(vel, np.zeros(3), psi))))
    return FlowVelocity(src / pn * p, False, False, qc)


def flow_step(tdm: TimeDependentModel, x, t: float, dt: float, previous: np.ndarray | None = None):
    """One RK4 step of the manifold flow; returns ``(x_new, flags)``."""
    x = np.asarray(x, dtype=float)
    start = flow_velocity(tdm, x, t, previous)
    if abs(start.qc.lambda0) > MEMBERSHIP_TOL:
        raise DynamicsError(f"x = {x} is off the eigenmanifold at t = {t} (lambda0 = {start.qc.lambda0:.3e})")
    flags = ("zero_velocity",) if start.zero else ()
    if start.zero:
        return x.copy(), flags
    prev = start.qc.amps
    k1 = start.xdot
    s2 = flow_velocity(tdm, x + 0.5 * dt * k1, t + 0.5 * dt, prev)
    k2 = s2.xdot
    s3 = flow_velocity(tdm, x + 0.5 * dt * k2, t + 0.5 * dt, s2.qc.amps)
    k3 = s3.xdot
    s4 = flow_velocity(tdm, x + dt * k3, t + dt, s3.qc.amps)
    k4 = s4.xdot
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), flags


@dataclass(frozen=True, eq=False)
class FlowPath:
    t: np.ndarray
    x: np.ndarray
    lambda0: np.ndarray
    flags: tuple[str, ...] = ()

    def rows(self):
        for tt, xx, lam in zip(self.t, self.x, self.lambda0):
            yield (tt, xx[0], xx[1], xx[2], lam)


def integrate_flow(tdm: TimeDependentModel, x0, t0: float, t1: float, dt: float) -> FlowPath:
    """RK4 flow from ``x0`` at ``t0`` to ``t1`` with step about ``dt``."""
    n = max(int(np.ceil(abs(t1 - t0) / dt - 1e-9)), 1)
    h = (t1 - t0) / n
    xs = [np.asarray(x0, dtype=float)]
    ts = [t0]
    qc = solve_qc(evolve_ops(tdm, t0), xs[0])
    lams = [qc.lambda0]
    prev = qc.amps
    flags: set[str] = set()
    for k in range(n):
        x_new, f = flow_step(tdm, xs[-1], ts[-1], h, prev)
        flags.update(f)
        t_new = t0 + (k + 1) * h
        qc = solve_qc(evolve_ops(tdm, t_new), x_new, previous=prev)
        prev = qc.amps
        xs.append(x_new)
        ts.append(t_new)
        lams.append(qc.lambda0)
    return FlowPath(np.array(ts), np.array(xs), np.array(lams), tuple(sorted(flags)))


def rotation_generator(fs: FuzzySpace, axis) -> np.ndarray:
    """Hermitian ``L`` with ``i[L, X^i] = (n x X)^i`` for a rotation symmetry of ``fs``."""
    n = np.asarray(axis, dtype=float)
    if fs.model_tag is ModelTag.FUZZY_SPHERE:
        r = float(fs.params["r"])
        gen = sum(n[i] * fs.x(i) for i in range(3)) / r
    elif fs.is_plane_family and np.allclose(np.abs(n), [0.0, 0.0, 1.0]):
        gen = -n[2] * number_op(fs.z.shape[0])
    else:
        raise DynamicsError(f"no rotation generator about {n} for {fs.model_tag.value}")
    k = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    for i in range(3):
        lhs = 1j * (gen @ fs.x(i) - fs.x(i) @ gen)
        rhs = sum(k[i, m] * fs.x(m) for m in range(3))
        if np.max(np.abs(lhs - rhs)) > 1e-10:
            raise DynamicsError(f"rotation about {n} is not a symmetry of {fs.model_tag.value}")
    return gen


@dataclass(frozen=True, eq=False)
class TimeDependentPotential:
    """Berry potential ``A = A_a ds^a + A_0 dt`` on a chart; ``lapse = 1 + A_0``."""

    A: np.ndarray
    A0: np.ndarray

    @property
    def lapse(self) -> np.ndarray:
        return 1.0 + self.A0


def time_component(tdm: TimeDependentModel, psi: np.ndarray) -> float:
    """``A_0`` for one quasicoherent state at ``t = 0``."""
    drv = tdm.driver
    if isinstance(drv, HeisenbergHamiltonian):
        return float(np.real(np.vdot(psi, _apply_orbital(drv.H, psi))))
    if isinstance(drv, RotationSO3):
        gen = rotation_generator(tdm.base, drv.axis)
        spin = 0.5 * sum(drv.axis[i] * SIGMA[i] for i in range(3))
        blocks = psi.reshape(2, -1)
        spun = (spin @ blocks).reshape(-1)
        return float(drv.omega * np.real(np.vdot(psi, spun) + np.vdot(psi, _apply_orbital(gen, psi))))
    raise DynamicsError("time component of the Berry potential needs a Heisenberg or rotation driver")


def td_berry_potential(tdm: TimeDependentModel, chart) -> TimeDependentPotential:
    """Spatial Berry potential of the static chart plus the time component per node."""
    from .connect import berry_potential

    A = berry_potential(chart)
    n1, n2 = chart.shape
    A0 = np.empty((n1, n2))
    for i in range(n1):
        for j in range(n2):
            A0[i, j] = time_component(tdm, chart.states[i, j])
    return TimeDependentPotential(A, A0)
