from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fuzzylab.opcore import build_model, number_op
from fuzzylab.perturb import (
    PerturbationError,
    PerturbationFlag,
    exact_shift,
    first_order_eigenvalue,
    perturb_nondegenerate,
    perturb_weakly_degenerate,
    perturbed_model,
    residual_after_shift,
)
from fuzzylab.qcstate import solve_qc


def random_hermitian(n, rng):
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return b + b.conj().T


def sphere_point(j=1.0):
    fs = build_model("fuzzy_sphere", {"j": j, "r": 1.0})
    x = np.array([0.3, 0.5, 0.8])
    return fs, solve_qc(fs, j * x / np.linalg.norm(x))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.1, 0.1), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
def test_constant_shift_is_recovered_exactly(c1, c2, c3):
    # X -> X + c moves every point by c, and first order already says so
    c = np.array([c1, c2, c3])
    fs, qc = sphere_point()
    n = qc.x / np.linalg.norm(qc.x)
    assume(np.linalg.norm(c) > 1e-6 and abs(c @ n) > 1e-3 * np.linalg.norm(c))
    dim = fs.hilbert_dim
    res = perturb_nondegenerate(fs, qc, [ci * np.eye(dim) for ci in c])
    np.testing.assert_allclose(res.delta_x, c, atol=1e-12)
    assert abs(np.vdot(res.perturbed_state, qc.amps)) == pytest.approx(1.0, abs=1e-12)
    assert res.validity == pytest.approx(0.0, abs=1e-12)


def test_zero_perturbation_is_trivial():
    fs, qc = sphere_point()
    res = perturb_nondegenerate(fs, qc, [None, None, None])
    assert PerturbationFlag.ZERO_DIRECTION in res.flags
    np.testing.assert_allclose(res.delta_x, 0.0)
    np.testing.assert_allclose(res.perturbed_state, qc.amps)
    circle = build_model("fuzzy_circle", {"N": 4})
    res = perturb_weakly_degenerate(circle, solve_qc(circle, [1.0, 0.0, 0.0]), [None, None, None])
    assert PerturbationFlag.ZERO_DIRECTION in res.flags


def test_tangent_perturbation_is_rejected():
    fs, qc = sphere_point()
    n = qc.x / np.linalg.norm(qc.x)
    t = np.cross(n, [0.0, 0.0, 1.0])
    with pytest.raises(PerturbationError, match="tangent"):
        perturb_nondegenerate(fs, qc, [0.01 * ti * np.eye(3) for ti in t])


def test_first_order_residual_scales_quadratically():
    fs, qc = sphere_point()
    ops = [random_hermitian(3, np.random.default_rng(0)) for _ in range(3)]
    res = []
    for eps in (0.01, 0.005):
        scaled = [eps * o for o in ops]
        r = perturb_nondegenerate(fs, qc, scaled)
        assert abs(first_order_eigenvalue(fs, qc, scaled, r.delta_x)) < 1e-15
        state = r.perturbed_state / np.linalg.norm(r.perturbed_state)
        res.append(residual_after_shift(fs, scaled, qc.x + r.delta_x, state))
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("alpha", [0.0, 0.6 - 0.2j, 1.1j])
def test_plane_to_paraboloid_shift(alpha):
    eps = 0.01
    n = 48
    fs = build_model("fuzzy_plane", {"fock_dim": n})
    qc = solve_qc(fs, [alpha.real, alpha.imag, 0.0])
    ops = [None, None, eps * (number_op(n) + 0.5 * np.eye(n))]
    res = perturb_nondegenerate(fs, qc, ops)
    # coherent-state expectation of eps (N + 1/2)
    np.testing.assert_allclose(res.delta_x, [0.0, 0.0, eps * (abs(alpha) ** 2 + 0.5)], atol=1e-13)
    np.testing.assert_allclose(res.direction, [0, 0, 1], atol=1e-12)
    shift, _ = exact_shift(fs, qc, ops)
    np.testing.assert_allclose(shift, res.delta_x, atol=1e-8)


def test_perturbed_model_adds_operators():
    fs = build_model("fuzzy_plane", {"fock_dim": 6})
    big = perturbed_model(fs, [None, None, number_op(6)])
    np.testing.assert_allclose(big.x(2), number_op(6))
    assert big.metadata["perturbed"]
    with pytest.raises(PerturbationError, match="shape"):
        perturbed_model(fs, [None, None, np.eye(3)])
    with pytest.raises(PerturbationError, match="three"):
        perturbed_model(fs, [None, None])


def test_circle_cluster_shifts_by_number_expectation():
    # X^1 eigenvector with eigenvalue 1 is the uniform vector, <N> = (N - 1) / 2
    eps = 0.01
    fs = build_model("fuzzy_circle", {"N": 4})
    qc = solve_qc(fs, [1.0, 0.0, 0.0])
    with pytest.raises(PerturbationError, match="weakly_degenerate"):
        perturb_nondegenerate(fs, qc, [None, None, eps * number_op(4)])
    res = perturb_weakly_degenerate(fs, qc, [None, None, eps * number_op(4)])
    np.testing.assert_allclose(res.delta_x, [0.0, 0.0, 1.5 * eps], atol=1e-14)
    np.testing.assert_allclose(res.eigenvalue_matrix, 0.0, atol=1e-14)
    assert res.flags == ()


def test_separable_cluster_uses_orbital_expectation():
    # generic perturbation of a circle point: the cluster is spin (x) uniform orbital
    fs = build_model("fuzzy_circle", {"N": 4})
    qc = solve_qc(fs, [1.0, 0.0, 0.0])
    rng = np.random.default_rng(5)
    ops = [0.01 * random_hermitian(4, rng) for _ in range(3)]
    res = perturb_weakly_degenerate(fs, qc, ops)
    omega = np.full(4, 0.5)
    expected = [np.vdot(omega, o @ omega).real for o in ops]
    np.testing.assert_allclose(res.delta_x, expected, atol=1e-14)
    assert res.eigenvalue_matrix.shape == (2, 2)
    np.testing.assert_allclose(res.eigenvalue_matrix, 0.0, atol=1e-14)
