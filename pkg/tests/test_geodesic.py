from __future__ import annotations

import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import RectBivariateSpline

from fuzzylab import geodesic as gd
from fuzzylab import kernels
from fuzzylab.connect import connection_field
from fuzzylab.manifold import ChartTag, GridSpec, metric_field, trace_eigenmanifold
from fuzzylab.opcore import build_model


@functools.lru_cache(maxsize=None)
def sphere_setup():
    fs = build_model("fuzzy_sphere", {"j": 1.0, "r": 1.0})
    grid = GridSpec.regular(ChartTag.SPHERE_ANGLES, (0.6, np.pi - 0.6), (0.0, 2.0), 21, 21)
    chart = trace_eigenmanifold(fs, [1.0, 0.0, 0.0], grid)
    return fs, chart, metric_field(fs, chart)


@functools.lru_cache(maxsize=None)
def plane_setup():
    fs = build_model("fuzzy_plane", {"fock_dim": 40})
    grid = GridSpec.centred(ChartTag.PLANE_COMPLEX, (0.0, 0.0), 0.1, 13)
    chart = trace_eigenmanifold(fs, [0.0, 0.0, 0.0], grid)
    m = metric_field(fs, chart)
    return fs, chart, m, connection_field(fs, chart, m)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.floats(0, 1), st.floats(-1, 0.5))
def test_spline_field_reproduces_cubics(c, u, v):
    s1, s2 = np.linspace(0, 1, 7), np.linspace(-1, 0.5, 6)
    f = lambda a, b: c[0] * a**3 + c[1] * a * a * b + c[2] * b**3 + c[3] * a * b  # noqa: E731
    vals = f(s1[:, None], s2[None, :])
    spl = gd.SplineField(s1, s2, vals[..., None])
    assert spl([u, v])[0] == pytest.approx(f(u, v), abs=1e-10)
    ref = RectBivariateSpline(s1, s2, vals, kx=3, ky=3, s=0)
    assert spl([u, v])[0] == pytest.approx(ref.ev(u, v), abs=1e-12)


def _constant_table(c):
    # only C^1_{11} = c over (t, s1, s2)
    tab = np.zeros((6, 6, 3, 3, 3))
    tab[..., 1, 1, 1] = c
    return gd.SplineField(np.linspace(-1, 5, 6), np.linspace(-1, 5, 6), tab.reshape(6, 6, 27))


def test_rk4_against_closed_form():
    # s'' = -c s'^2  =>  s(t) = s0 + log(1 + c v0 t) / c
    c, v0 = 0.8, 1.3
    f = _constant_table(c)
    errs = []
    for h in (0.1, 0.05):
        n = int(round(1.0 / h))
        traj, done = kernels.integrate_rk4(f.tx, f.ty, f.coef, np.array([0, 0.0, 0.0, 0, v0, 0.0]), h, n, f.lo, f.hi)
        traj = np.asarray(traj)
        assert done == n
        errs.append(abs(traj[-1, 1] - np.log(1 + c * v0) / c))
        np.testing.assert_allclose(traj[:, 2], 0.0)
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.15)


def test_rk4_stops_at_chart_edge():
    f = _constant_table(0.0)
    traj, done = kernels.integrate_rk4(f.tx, f.ty, f.coef, np.array([0, 4.0, 0.0, 0, 1.0, 0.0]), 0.1, 100, f.lo, f.hi)
    assert done < 100
    assert np.asarray(traj)[-1, 1] > 5.0


def test_sphere_metric_christoffels():
    _, chart, m = sphere_setup()
    G = gd.metric_christoffels(chart.s1, chart.s2, m.gamma)
    th = chart.s1[5:-5, None]
    # fourth-order differences of the traced metric at h ~ 0.1
    np.testing.assert_allclose(G[5:-5, :, 0, 1, 1], -np.sin(th) * np.cos(th) * np.ones((1, 21)), atol=1e-4)
    np.testing.assert_allclose(G[5:-5, :, 1, 0, 1], np.cos(th) / np.sin(th) * np.ones((1, 21)), atol=1e-4)
    # the embedding route gives the same symbols
    G2 = gd.induced_christoffels(m)
    np.testing.assert_allclose(G2[5:-5], G[5:-5], atol=1e-4)


def test_equator_is_a_geodesic():
    _, chart, m = sphere_setup()
    path = gd.integrate_gmlm(chart, m, [np.pi / 2, 0.3], [0.0, 1.0], 1.2, 0.02)
    assert not path.exited
    np.testing.assert_allclose(path.s[:, 0], np.pi / 2, atol=1e-8)
    np.testing.assert_allclose(path.s[:, 1], 0.3 + path.t, atol=1e-6)
    # speed from the interpolated traced metric
    np.testing.assert_allclose(path.diagnostics["speed"], 1.0, atol=1e-5)


def test_tilted_great_circle_conserves_speed():
    _, chart, m = sphere_setup()
    path = gd.integrate_gmlm(chart, m, [1.2, 0.4], [0.3, 0.5], 1.5, 0.02)
    x = path.x / np.linalg.norm(path.x, axis=1)[:, None]
    # all points lie in the plane through the origin spanned by x(0) and x'(0)
    normal = np.cross(x[0], path.diagnostics["xdot"][0])
    normal /= np.linalg.norm(normal)
    np.testing.assert_allclose(x @ normal, 0.0, atol=1e-6)
    sp = path.diagnostics["speed"]
    assert np.max(np.abs(sp - sp[0])) < 1e-6


def test_plane_paths_are_straight():
    _, chart, m, conn = plane_setup()
    g = gd.integrate_gmlm(chart, m, [-0.2, 0.1], [0.3, -0.2], 1.0, 0.05)
    np.testing.assert_allclose(g.s[-1], [0.1, -0.1], atol=1e-10)
    sa = gd.integrate_saag(chart, m, conn, [-0.2, 0.1], [0.3, -0.2], 1.0, 1.0, 0.05)
    assert gd.momentum_check(sa) < 1e-8
    with pytest.raises(gd.GeodesicError):
        gd.momentum_check(g)


def test_rows_layout():
    _, chart, m, _ = plane_setup()
    g = gd.integrate_gmlm(chart, m, [0.0, 0.0], [0.1, 0.0], 0.5, 0.1)
    rows = g.rows()
    assert rows.shape == (6, 12)
    np.testing.assert_allclose(rows[:, 0], g.t)
    assert np.all(np.isnan(rows[:, 9:]))


def test_start_and_step_validation():
    _, chart, m, _ = plane_setup()
    with pytest.raises(gd.GeodesicError, match="interior"):
        gd.integrate_gmlm(chart, m, [0.7, 0.0], [1, 0], 1.0, 0.1)
    with pytest.raises(gd.GeodesicError, match="positive"):
        gd.integrate_gmlm(chart, m, [0.0, 0.0], [1, 0], 1.0, 0.0)


def test_gmal_vertices_equal_quantum_steps_on_plane():
    fs, chart, _, _ = plane_setup()
    path = gd.integrate_gmal(fs, chart, [-0.2, -0.1], [1.0, 0.5], 0.05, 5)
    steps = np.linalg.norm(np.diff(path.s, axis=0), axis=1)
    np.testing.assert_allclose(steps, 0.05, atol=1e-6)
    d = np.diff(path.s, axis=0)
    cross = d[:, 0] * 0.5 - d[:, 1] * 1.0
    np.testing.assert_allclose(cross, 0.0, atol=1e-6)
    trivial = gd.integrate_gmal(fs, chart, [-0.2, -0.1], [1.0, 0.5], 0.0, 5)
    assert len(trivial.t) == 1
