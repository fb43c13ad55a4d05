from __future__ import annotations

import itertools

import numpy as np
import pytest

from curvq.expressions import BinOp, Const, Func, Neg, Pow, Var, parse_expression
from curvq.jets import EvaluationError, eval_jet


def test_constant_jet():
    jet = eval_jet(Const(5.0), np.array([0.7, -0.3]), n=2, order=2)
    assert jet.value == 5.0
    assert np.all(jet.grad == 0.0)
    assert np.all(jet.hess == 0.0)


def test_sine_at_zero():
    jet = eval_jet(parse_expression("sin(x1)", 1), np.array([0.0]), 1, order=1)
    assert jet.value == pytest.approx(0.0)
    assert jet.grad[0] == pytest.approx(1.0)


def test_bilinear():
    jet = eval_jet(parse_expression("x1*x2", 2), np.array([2.0, 3.0]), 2, order=2)
    assert jet.value == 6.0
    assert jet.grad[0] == 3.0 and jet.grad[1] == 2.0
    assert jet.hess[0, 1] == 1.0 and jet.hess[1, 0] == 1.0
    assert jet.hess[0, 0] == 0.0 and jet.hess[1, 1] == 0.0


def test_division_by_zero_names_node():
    ast = parse_expression("1/(x1 - 1)", 1)
    with pytest.raises(EvaluationError, match="division by zero"):
        eval_jet(ast, np.array([1.0]), 1, order=1)


def test_log_domain_error_names_node():
    ast = parse_expression("log(x1 - 2)", 1)
    with pytest.raises(EvaluationError, match="log"):
        eval_jet(ast, np.array([1.5]), 1, order=0)


def test_integer_power_negative_base():
    jet = eval_jet(parse_expression("x1^3", 1), np.array([-2.0]), 1, order=3)
    assert jet.value == -8.0
    assert jet.grad[0] == 12.0
    assert jet.hess[0, 0] == -12.0
    assert jet.third[0, 0, 0] == 6.0


def test_fractional_power_requires_positive_base():
    ast = parse_expression("x1^0.5", 1)
    with pytest.raises(EvaluationError):
        eval_jet(ast, np.array([-1.0]), 1, order=1)


_RANDOM_EXPRS = [
    "sin(x1*x2) + cos(x1)^2",
    "exp(0.3*x1 - 0.2*x2^2)",
    "(x1 + 2)/(x2 + 3)",
    "tanh(x1)*sinh(0.5*x2)",
    "sqrt(x1^2 + x2^2 + 1)",
    "log(2 + sin(x1) + 0.5*cos(x2))",
    "x1^3 - 2*x1*x2^2 + x2",
    "tan(0.4*x1)*x2",
]


def _fd_gradient(ast, pt, n, h=1e-4):
    """Richardson-extrapolated central differences of jet values."""
    grad = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0

        def d(step):
            up = eval_jet(ast, pt + step * e, n, 0).value
            dn = eval_jet(ast, pt - step * e, n, 0).value
            return (up - dn) / (2 * step)

        grad[i] = (4.0 * d(h / 2) - d(h)) / 3.0
    return grad


@pytest.mark.parametrize("text", _RANDOM_EXPRS)
def test_gradient_matches_finite_differences(text, rng):
    ast = parse_expression(text, 2)
    for _ in range(13):  # ~100 randomized checks over the expression set
        pt = rng.uniform(0.2, 1.4, size=2)
        jet = eval_jet(ast, pt, 2, order=1)
        fd = _fd_gradient(ast, pt, 2)
        scale = max(1.0, float(np.abs(fd).max()))
        assert np.abs(jet.grad.ravel() - fd).max() <= 1e-6 * scale


@pytest.mark.parametrize("text", _RANDOM_EXPRS[:4])
def test_hessian_matches_fd_of_gradient(text, rng):
    ast = parse_expression(text, 2)
    pt = rng.uniform(0.3, 1.2, size=2)
    jet = eval_jet(ast, pt, 2, order=2)
    h = 1e-4
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        up = eval_jet(ast, pt + h * e, 2, 1).grad.ravel()
        dn = eval_jet(ast, pt - h * e, 2, 1).grad.ravel()
        fd = (up - dn) / (2 * h)
        assert np.abs(jet.hess[:, j].ravel() - fd).max() <= 2e-6 * max(
            1.0, float(np.abs(fd).max())
        )


@pytest.mark.parametrize("text", _RANDOM_EXPRS[:4])
def test_third_matches_fd_of_hessian(text, rng):
    ast = parse_expression(text, 2)
    pt = rng.uniform(0.3, 1.2, size=2)
    jet = eval_jet(ast, pt, 2, order=3)
    h = 2e-4
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1.0
        up = eval_jet(ast, pt + h * e, 2, 2).hess
        dn = eval_jet(ast, pt - h * e, 2, 2).hess
        fd = (up - dn) / (2 * h)
        assert np.abs(jet.third[:, :, k] - fd).max() <= 2e-5 * max(
            1.0, float(np.abs(fd).max())
        )


@pytest.mark.parametrize("text", _RANDOM_EXPRS)
def test_symmetry_is_bitwise(text, rng):
    ast = parse_expression(text, 2)
    pts = rng.uniform(0.2, 1.3, size=(2, 40))
    jet = eval_jet(ast, pts, 2, order=3)
    for i, j in itertools.permutations(range(2), 2):
        np.testing.assert_array_equal(jet.hess[i, j], jet.hess[j, i])
    for idx in itertools.combinations_with_replacement(range(2), 3):
        for perm in itertools.permutations(idx):
            np.testing.assert_array_equal(jet.third[idx], jet.third[perm])


def test_batched_matches_pointwise(rng):
    ast = parse_expression("exp(sin(x1))*cos(x2) + x1/(x2+2)", 2)
    pts = rng.uniform(0.1, 1.5, size=(2, 17))
    batch = eval_jet(ast, pts, 2, order=2)
    for b in range(17):
        single = eval_jet(ast, pts[:, b], 2, order=2)
        assert batch.value[b] == single.value
        np.testing.assert_array_equal(batch.grad[:, b], single.grad.ravel())
        np.testing.assert_array_equal(batch.hess[:, :, b], single.hess)
