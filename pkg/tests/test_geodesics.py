from __future__ import annotations

import math

import numpy as np
import pytest

from curvq.geodesics import (
    ChartError,
    exponential_map,
    geodesic_distance,
    geodesic_fan,
    normal_coordinates,
    van_vleck,
)
from curvq.geometry import metric_at
from curvq.metrics import resolve_preset


def _sphere_distance(a, b):
    c = math.cos(a[0]) * math.cos(b[0]) + math.sin(a[0]) * math.sin(b[0]) * math.cos(
        b[1] - a[1]
    )
    return math.acos(max(-1.0, min(1.0, c)))


def test_flat_straight_lines(flat2, rng):
    p = rng.uniform(-1, 1, size=2)
    h = rng.uniform(-1, 1, size=2)
    h /= np.linalg.norm(h)
    out = exponential_map(flat2, p, h, 1.7)
    np.testing.assert_allclose(out, p + 1.7 * h, atol=1e-10)


def test_zero_arclength(sphere):
    p = np.array([1.2, 0.4])
    out = exponential_map(sphere, p, [1.0, 0.0], 0.0)
    np.testing.assert_array_equal(out, p)


def test_great_circle_quarter_turn(sphere):
    out = exponential_map(sphere, [math.pi / 2, 0.0], [0.0, 1.0], math.pi / 2)
    np.testing.assert_allclose(out, [math.pi / 2, math.pi / 2], atol=1e-9)


def test_non_unit_tangent_rejected(sphere):
    with pytest.raises(ValueError, match="unit"):
        exponential_map(sphere, [1.0, 0.0], [0.0, 1.0], 0.5)


@pytest.mark.parametrize("preset,point", [
    ("sphere-2(1)", [1.1, 0.4]),
    ("hyperbolic-2(1)", [0.8, 0.2]),
    ("conformal-2(0.3*sin(x1)*sin(x2))", [1.3, 2.1]),
])
def test_speed_preserved_along_trajectory(preset, point):
    spec = resolve_preset(preset)
    p = np.asarray(point, dtype=float)
    h = np.array([0.6, 0.8])
    g = metric_at(spec, p).lower
    h = h / math.sqrt(h @ g @ h)
    for s in (0.5, 1.0, 1.5):
        out, vel = exponential_map(spec, p, h, s, return_velocity=True)
        gout = metric_at(spec, out).lower
        assert abs(vel @ gout @ vel - 1.0) <= 1e-8 * max(1.0, s)


def test_normal_chart_forward_zero(sphere):
    chart = normal_coordinates(sphere, [1.0, 2.0])
    np.testing.assert_array_equal(chart.forward([0.0, 0.0]), [1.0, 2.0])


def test_normal_chart_flat_affine(flat2):
    chart = normal_coordinates(flat2, [0.5, -0.3])
    y = np.array([0.7, 0.2])
    np.testing.assert_allclose(
        chart.forward(y), np.array([0.5, -0.3]) + chart.frame @ y, atol=1e-10
    )


def test_normal_chart_metric_identity_at_origin(sphere):
    chart = normal_coordinates(sphere, [1.1, 0.7])
    h = 1e-4
    # pull the metric back through the frame at the origin
    g = metric_at(sphere, chart.origin).lower
    gram = chart.frame.T @ g @ chart.frame
    np.testing.assert_allclose(gram, np.eye(2), atol=1e-10)
    # christoffels vanish at the origin: quadratic residual of the forward map
    y = np.array([[h, 0.0], [0.0, h]])
    pts = chart.forward_batch(y)
    lin = chart.origin[:, None] + chart.frame @ y
    assert np.abs(pts - lin).max() <= 5e-7  # only curvature-order terms remain


def test_backward_roundtrip_and_distance(sphere, rng):
    chart = normal_coordinates(sphere, [1.1, 0.7])
    for _ in range(5):
        target = [rng.uniform(0.7, 1.7), rng.uniform(0.2, 1.4)]
        y = chart.backward(target)
        np.testing.assert_allclose(chart.forward(y), target, atol=1e-9)
        assert np.linalg.norm(y) == pytest.approx(
            _sphere_distance([1.1, 0.7], target), abs=1e-9
        )


def test_backward_periodic_wrap(sphere):
    chart = normal_coordinates(sphere, [math.pi / 2, 0.1])
    # a point just across the periodic seam
    y = chart.backward([math.pi / 2, 2 * math.pi - 0.2])
    assert np.linalg.norm(y) == pytest.approx(0.3, abs=1e-9)


def test_backward_nonconvergence_raises(sphere):
    chart = normal_coordinates(sphere, [math.pi / 2, 0.0])
    chart.max_newton = 1
    with pytest.raises(ChartError, match="converge"):
        chart.backward([1.0, 1.9])


def test_geodesic_distance_helper(sphere):
    d = geodesic_distance(sphere, [1.1, 0.7], [1.4, 1.2])
    assert d == pytest.approx(_sphere_distance([1.1, 0.7], [1.4, 1.2]), abs=1e-9)


def test_van_vleck_flat(flat2):
    D = van_vleck(flat2, [0.1, 0.2], [0.5, 0.9], dt=0.25)
    assert D == pytest.approx(16.0, rel=1e-5)


def test_van_vleck_short_distance_limit(sphere):
    # chart-coordinate Hessian: D -> (m/dt)^n * det(w)(p1) * (1 + O(d^2));
    # the det factor is what the kernel's quarter powers cancel.  d = 0.05
    # keeps the action finite differences conditioned while d^2 ~ 2.5e-3.
    D = van_vleck(sphere, [1.2, 0.5], [1.2, 0.5 + 0.05 / math.sin(1.2)], dt=0.5)
    assert D == pytest.approx(4.0 * math.sin(1.2) ** 2, rel=5e-3)
    # in a chart with unit metric determinant the bare (m/dt)^n limit holds
    flat = resolve_preset("flat-cartesian-2")
    D = van_vleck(flat, [0.3, 0.4], [0.34, 0.43], dt=0.5)
    assert D == pytest.approx(4.0, rel=1e-4)


def test_van_vleck_sphere_structure(sphere):
    # equatorial pair at geodesic distance 1: D = (m/dt)^2 (d / sin d)
    D, spread = van_vleck(
        sphere, [math.pi / 2, 0.0], [math.pi / 2, 1.0], dt=1.0, return_check=True
    )
    assert spread <= 1e-4
    assert D == pytest.approx(1.0 / math.sin(1.0), rel=1e-6)


def test_van_vleck_jacobian_route_agrees(sphere):
    # the geodesic-fan Jacobian reproduces the action-Hessian determinant
    pt = [math.pi / 2, 0.0]
    chart = normal_coordinates(sphere, pt)
    s = 1.0
    dirs = np.array([[0.0], [1.0]])
    xi, det_a = geodesic_fan(sphere, pt, chart.frame, dirs, np.linspace(0.01, s, 120))
    w1 = metric_at(sphere, pt).sqrt_det
    # |det J| at y = s*u is det_a / s^n
    D_fan = (1.0 / 1.0) ** 2 * w1 / (det_a[-1, 0] / s**2)
    D_fd = van_vleck(sphere, pt, xi[:, -1, 0], dt=1.0)
    assert D_fan == pytest.approx(D_fd, rel=1e-5)


def test_fan_matches_closed_form_sphere(sphere):
    pt = np.array([math.pi / 2, 0.8])
    chart = normal_coordinates(sphere, pt)
    th = 2 * np.pi * np.arange(6) / 6
    dirs = np.stack([np.cos(th), np.sin(th)], axis=0)
    s_grid = np.linspace(0.02, 1.2, 60)
    xi, det_a = geodesic_fan(sphere, pt, chart.frame, dirs, s_grid)
    for k in range(6):
        for i in (10, 40, 59):
            d = _sphere_distance(pt, xi[:, i, k])
            assert d == pytest.approx(s_grid[i], abs=1e-9)
            # invariant volume spread: sqrt(w) det_a = s sin(s)
            w = metric_at(sphere, xi[:, i, k]).sqrt_det
            assert w * det_a[i, k] == pytest.approx(
                s_grid[i] * math.sin(s_grid[i]), rel=1e-6
            )
