from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzylab.opcore import build_model, coherent_vector, dirac_matrix, fock_tail_weight
from fuzzylab.qcstate import (
    DegeneracyClass,
    align_phase,
    apply_dirac,
    fix_gauge,
    local_data,
    nontrivial_normal_rank,
    reference_spinor,
    solve_qc,
    sphere_angles,
    sphere_rotation,
    spin_density,
)

unit = st.floats(-1, 1, allow_nan=False)


def _unit_vector(a, b, c):
    v = np.array([a, b, c])
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 1e-3 else np.array([0.0, 0.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(unit, unit, unit)
def test_sphere_qc_state_on_radius(a, b, c):
    # spin-j irrep at scale r: the eigenmanifold is the sphere of radius r j
    j, r = 1.5, 0.5
    fs = build_model("fuzzy_sphere", {"j": j, "r": r})
    n = _unit_vector(a, b, c)
    qc = solve_qc(fs, r * j * n)
    data = local_data(fs, qc)
    assert abs(qc.lambda0) < 1e-12
    assert qc.degeneracy is DegeneracyClass.STRONGLY_NONDEGENERATE
    np.testing.assert_allclose(data.n_vec, n, atol=1e-10)
    np.testing.assert_allclose(data.mean_x, r * j * n, atol=1e-10)
    # total variance <X.X> - |<X>|^2 = r^2 j(j+1) - r^2 j^2
    assert np.sum(data.sigma_x**2) == pytest.approx(r * r * j, abs=1e-10)
    assert data.purity == pytest.approx(1.0, abs=1e-12)


def test_sphere_gauge_matches_rotated_highest_weight():
    fs = build_model("fuzzy_sphere", {"j": 1.0, "r": 1.0})
    theta, phi = 1.1, -0.7
    x = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    qc = solve_qc(fs, x)
    assert sphere_angles(x) == pytest.approx((theta, phi))
    ref = reference_spinor(fs, x)
    assert abs(np.vdot(ref, qc.amps)) == pytest.approx(1.0, abs=1e-12)
    assert np.vdot(ref, qc.amps).real > 0
    # the rotation maps the z axis to x
    s1, s2, s3 = (sphere_rotation(0.5, theta, phi).conj().T @ s @ sphere_rotation(0.5, theta, phi) for s in (
        np.array([[0, 1], [1, 0]]),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]]),
    ))
    up = np.array([1, 0])
    np.testing.assert_allclose([np.vdot(up, s @ up).real for s in (s1, s2, s3)], x, atol=1e-12)


def test_plane_qc_state_is_coherent_spinor():
    fs = build_model("fuzzy_plane", {"fock_dim": 40})
    alpha = 0.5 - 0.3j
    qc = solve_qc(fs, [alpha.real, alpha.imag, 0.0])
    expected = np.kron([1, 0], coherent_vector(alpha, 40))
    assert abs(np.vdot(expected, qc.amps)) == pytest.approx(1.0, abs=1e-12)
    data = local_data(fs, qc)
    np.testing.assert_allclose(data.mean_x, [0.5, -0.3, 0.0], atol=1e-12)
    np.testing.assert_allclose(data.sigma_x, [0.5, 0.5, 0.0], atol=1e-12)
    np.testing.assert_allclose(data.n_vec, [0, 0, 1], atol=1e-12)
    assert data.linear_entropy == pytest.approx(0.0, abs=1e-14)


def test_plane_truncation_ghost_sits_on_top_level():
    # the truncated lowering operator leaves a null vector for W+ on the top Fock level
    fs = build_model("fuzzy_plane", {"fock_dim": 40})
    qc = solve_qc(fs, [0.5, -0.3, 0.0])
    assert qc.cluster_size == 2
    tails = sorted(fock_tail_weight(v.reshape(2, -1)) for v in qc.cluster)
    assert tails[0] < 1e-20 and tails[1] > 0.5


@pytest.mark.parametrize("x3", [-0.4, 0.2, 0.9])
def test_plane_off_manifold_eigenvalue_is_minus_x3(x3):
    # the truncation ghost sits at +x3, so track the coherent spinor explicitly
    fs = build_model("fuzzy_plane", {"fock_dim": 30})
    anchor = np.kron([1, 0], coherent_vector(0.2 + 0.1j, 30))
    qc = solve_qc(fs, [0.2, 0.1, x3], previous=anchor)
    assert qc.lambda0 == pytest.approx(-x3, abs=1e-12)
    assert not qc.on_manifold


def test_circle_points_are_weakly_degenerate():
    fs = build_model("fuzzy_circle", {"N": 4})
    qc = solve_qc(fs, [1.0, 0.0, 0.0])
    assert qc.degeneracy is DegeneracyClass.WEAKLY_DEGENERATE
    assert qc.cluster_size == 2
    assert qc.gap == pytest.approx(np.sqrt(2), abs=1e-12)
    # cluster spans spin up and spin down copies of the same orbital state
    assert nontrivial_normal_rank(fs, qc) == 1


def test_tracking_follows_previous_state():
    fs = build_model("fuzzy_sphere", {"j": 1.0, "r": 1.0})
    x = np.array([0.0, 0.0, 1.0])
    first = solve_qc(fs, x)
    nudged = solve_qc(fs, x + [0.01, 0.0, 0.0], previous=first.amps)
    assert np.vdot(first.amps, nudged.amps).real > 0.99
    assert abs(np.vdot(first.amps, nudged.amps).imag) < 1e-12


def test_fast_window_agrees_with_full_solve():
    fs = build_model("elliptic_paraboloid", {"fock_dim": 64, "epsilon": 0.1})
    x = [0.4, -0.2, 0.3]
    full, fast = solve_qc(fs, x), solve_qc(fs, x, fast=True)
    assert fast.lambda0 == pytest.approx(full.lambda0, abs=1e-12)
    assert fast.gap == pytest.approx(full.gap, abs=1e-12)
    assert abs(np.vdot(full.amps, fast.amps)) == pytest.approx(1.0, abs=1e-10)


def test_residual_and_apply_dirac():
    fs = build_model("hyperbolic_paraboloid", {"fock_dim": 20, "epsilon": 0.2})
    x = np.array([0.1, 0.3, 0.05])
    qc = solve_qc(fs, x)
    assert qc.residual < 1e-12
    rng = np.random.default_rng(0)
    psi = rng.normal(size=40) + 1j * rng.normal(size=40)
    np.testing.assert_allclose(apply_dirac(fs, x, psi), dirac_matrix(fs, x) @ psi, atol=1e-13)


def test_gauge_helpers():
    v = np.array([0.0, 1j, 0.0, 0.0])
    np.testing.assert_allclose(fix_gauge(v), [0, 1, 0, 0])
    ref = np.array([0, 1, 0, 0], dtype=complex)
    np.testing.assert_allclose(fix_gauge(-v, ref), [0, 1, 0, 0])
    np.testing.assert_allclose(align_phase(1j * ref, ref), ref)


def test_spin_density_and_entropy_of_entangled_state():
    psi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    np.testing.assert_allclose(spin_density(psi), np.eye(2) / 2)
    fs = build_model("fuzzy_plane", {"fock_dim": 2})
    data = local_data(fs, psi)
    assert data.linear_entropy == pytest.approx(0.5)
    assert data.purity == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError, match="normalised"):
        local_data(fs, 2 * psi)
