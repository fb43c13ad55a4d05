from __future__ import annotations

import math

import numpy as np
import pytest

from curvq.expressions import parse_expression
from curvq.geometry import (
    MetricEvaluationError,
    christoffel,
    curvature,
    laplace_beltrami_apply,
    metric_at,
)
from curvq.jets import eval_jet
from curvq.metrics import parse_metric_config, resolve_preset


def test_metric_identity_on_flat(flat2, rng):
    for _ in range(5):
        mv = metric_at(flat2, rng.uniform(-3, 3, size=2))
        np.testing.assert_allclose(mv.lower, np.eye(2))
        assert mv.det == 1.0


def test_metric_polar_values(polar):
    mv = metric_at(polar, [2.0, 0.3])
    np.testing.assert_allclose(mv.lower, np.diag([1.0, 4.0]))
    np.testing.assert_allclose(mv.upper, np.diag([1.0, 0.25]))
    assert mv.sqrt_det == pytest.approx(2.0)
    np.testing.assert_allclose(mv.upper @ mv.lower, np.eye(2), atol=1e-12)


def test_metric_sphere_equator(sphere):
    mv = metric_at(sphere, [math.pi / 2, 1.0])
    np.testing.assert_allclose(mv.lower, np.eye(2), atol=1e-15)


def test_non_positive_definite_reports_eigenvalue(polar):
    with pytest.raises(MetricEvaluationError, match="eigenvalue"):
        metric_at(polar, [0.0, 0.1])


def test_christoffel_flat_zero(flat2):
    ch = christoffel(flat2, [0.4, -1.0])
    assert np.all(ch.gamma == 0.0)


def _fd_log_sqrt_det(spec, pt, i, h=1e-5):
    e = np.zeros(len(pt))
    e[i] = 1.0
    up = math.log(metric_at(spec, np.asarray(pt) + h * e).sqrt_det)
    dn = math.log(metric_at(spec, np.asarray(pt) - h * e).sqrt_det)
    return (up - dn) / (2 * h)


def test_christoffel_polar(polar):
    r = 1.7
    ch = christoffel(polar, [r, 0.4])
    assert ch.gamma[0, 1, 1] == pytest.approx(-r, rel=1e-12)
    assert ch.gamma[1, 0, 1] == pytest.approx(1.0 / r, rel=1e-12)
    assert ch.gamma[1, 1, 0] == pytest.approx(1.0 / r, rel=1e-12)
    # contracted symbol equals d_i ln sqrt(det), checked against finite differences
    assert ch.contracted[0] == pytest.approx(1.0 / r, rel=1e-12)
    assert ch.contracted[1] == 0.0
    assert ch.contracted[0] == pytest.approx(_fd_log_sqrt_det(polar, [r, 0.4], 0), abs=1e-8)


def test_christoffel_sphere(sphere):
    th = 0.9
    ch = christoffel(sphere, [th, 0.2])
    assert ch.gamma[0, 1, 1] == pytest.approx(-math.sin(th) * math.cos(th), rel=1e-12)
    assert ch.gamma[1, 0, 1] == pytest.approx(1.0 / math.tan(th), rel=1e-12)
    assert ch.contracted[0] == pytest.approx(_fd_log_sqrt_det(sphere, [th, 0.2], 0), abs=1e-8)


@pytest.mark.parametrize("preset", ["flat-polar-2", "sphere-2(1)", "hyperbolic-2(1)",
                                    "conformal-2(0.3*sin(x1)*sin(x2))"])
def test_contracted_identity_random_points(preset, rng):
    spec = resolve_preset(preset)
    for _ in range(6):
        pt = [rng.uniform(0.4, 2.2), rng.uniform(0.0, 5.0)]
        ch = christoffel(spec, pt)
        for i in range(2):
            fd = _fd_log_sqrt_det(spec, pt, i)
            assert ch.contracted[i] == pytest.approx(fd, abs=1e-8)
        # contraction consistency gamma_i = gamma^k_{ki}
        np.testing.assert_allclose(
            ch.contracted, np.einsum("kki->i", ch.gamma), atol=1e-12
        )


def test_curvature_flat_zero(flat2, polar, rng):
    for _ in range(50):
        assert abs(curvature(flat2, rng.uniform(-2, 2, size=2)).scalar) <= 1e-10
        pt = [rng.uniform(0.3, 4.0), rng.uniform(0.0, 2 * math.pi)]
        assert abs(curvature(polar, pt).scalar) <= 1e-10


def test_curvature_sphere_chart_independent(rng):
    for a in (1.0, 2.0):
        spec = resolve_preset(f"sphere-2({a})")
        for _ in range(50):
            pt = [rng.uniform(0.2, math.pi - 0.2), rng.uniform(0, 2 * math.pi)]
            assert curvature(spec, pt).scalar == pytest.approx(2.0 / a**2, abs=1e-8)


def test_curvature_hyperbolic(hyperbolic, rng):
    for _ in range(10):
        pt = [rng.uniform(0.3, 2.0), rng.uniform(0, 2 * math.pi)]
        assert curvature(hyperbolic, pt).scalar == pytest.approx(-2.0, abs=1e-8)


def test_curvature_conformal_closed_form(conformal, rng):
    # R = -2 exp(-2 phi) lap0 phi for w = exp(2 phi) delta
    for _ in range(10):
        x, y = rng.uniform(0.2, 5.8, size=2)
        phi = 0.3 * math.sin(x) * math.sin(y)
        lap0 = -2 * 0.3 * math.sin(x) * math.sin(y)
        expected = -2.0 * math.exp(-2 * phi) * lap0
        assert curvature(conformal, [x, y]).scalar == pytest.approx(expected, abs=1e-9)


def test_riemann_symmetries_and_bianchi(conformal, sphere, rng):
    for spec in (conformal, sphere):
        pt = [rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)]
        cu = curvature(spec, pt)
        R = cu.riemann
        np.testing.assert_allclose(R, -np.einsum("abdc->abcd", R), atol=1e-10)
        bianchi = R + np.einsum("acdb->abcd", R) + np.einsum("adbc->abcd", R)
        assert np.abs(bianchi).max() <= 1e-8
        np.testing.assert_allclose(cu.ricci, cu.ricci.T, atol=1e-8)


def test_laplace_beltrami_flat_quadratic(flat2):
    f = parse_expression("x1^2", 2)
    assert laplace_beltrami_apply(flat2, f, [0.3, 0.8]) == pytest.approx(2.0)


def test_laplace_beltrami_polar_harmonic(polar, rng):
    # r cos(phi) is the Cartesian coordinate x: harmonic
    f = parse_expression("x1*cos(x2)", 2)
    for _ in range(5):
        pt = [rng.uniform(0.3, 3.0), rng.uniform(0, 2 * math.pi)]
        assert abs(laplace_beltrami_apply(polar, f, pt)) <= 1e-10


def test_laplace_beltrami_chart_covariance(flat2, polar, rng):
    # the scalar field "Cartesian x squared" expressed in both charts
    f_cart = parse_expression("x1^2", 2)
    f_pol = parse_expression("(x1*cos(x2))^2", 2)
    for _ in range(5):
        r, phi = rng.uniform(0.4, 2.5), rng.uniform(0, 2 * math.pi)
        cart = [r * math.cos(phi), r * math.sin(phi)]
        v1 = laplace_beltrami_apply(flat2, f_cart, cart)
        v2 = laplace_beltrami_apply(polar, f_pol, [r, phi])
        assert v1 == pytest.approx(v2, abs=1e-8)


def test_laplace_beltrami_sphere_eigenfunction(sphere, rng):
    f = parse_expression("cos(x1)", 2)
    for _ in range(5):
        th = rng.uniform(0.2, math.pi - 0.2)
        got = laplace_beltrami_apply(sphere, f, [th, 1.1])
        assert got == pytest.approx(-2.0 * math.cos(th), rel=1e-10)
