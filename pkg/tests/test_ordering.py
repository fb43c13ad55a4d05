from __future__ import annotations

import math

import numpy as np
import pytest

from curvq.expressions import parse_expression
from curvq.geometry import laplace_beltrami_apply
from curvq.jets import eval_value
from curvq.metrics import resolve_preset
from curvq.ordering import (
    NEW,
    RIVIER,
    WEYL,
    OrderingRule,
    curvature_coefficient,
    hamiltonian_symbolic,
    momentum_operator_apply,
    ordered_kinetic_apply,
    parse_rule,
    quantum_potential,
)

TEST_FIELDS = [
    "exp(sin(x1))*cos(x2) + 2",
    "x1*x2 + cos(x1)*sin(2*x2)",
    "1/(2 + sin(x1) + cos(x2))",
]


def test_rule_normalization_enforced():
    with pytest.raises(ValueError, match="sum to 1"):
        OrderingRule(0.7, 0.7)


def test_parse_rule_presets_and_weights():
    assert parse_rule("weyl") is WEYL
    assert parse_rule("2,-1") is NEW
    custom = parse_rule("0.5,0.5")
    assert custom.w_weyl == 0.5
    with pytest.raises(ValueError):
        parse_rule("sideways")


def test_momentum_operator_flat(flat2):
    psi = parse_expression("x1", 2)
    val = momentum_operator_apply(flat2, 1, psi, [1.0, 1.0])
    assert val == pytest.approx(-1j)
    const = parse_expression("3", 2)
    assert momentum_operator_apply(flat2, 2, const, [0.3, 0.4]) == 0.0


def test_momentum_operator_polar_density_term(polar):
    # psi = 1: operator reduces to -i (1/4) d_r ln(r^2) = -i/(2r)
    psi = parse_expression("1", 2)
    for r in (0.5, 2.0, 3.7):
        val = momentum_operator_apply(polar, 1, psi, [r, 0.8])
        assert val == pytest.approx(-1j / (2 * r), rel=1e-12)
    # jet oracle for the log-density gradient
    lnw = parse_expression("log(x1^2)", 2)
    from curvq.jets import eval_jet

    grad = eval_jet(lnw, np.array([2.0, 0.8]), 2, 1).grad[0]
    assert momentum_operator_apply(polar, 1, psi, [2.0, 0.8]) == pytest.approx(
        -0.25j * grad
    )


def test_quantum_potential_flat_all_rules(flat2, rng):
    for _ in range(10):
        pt = rng.uniform(-2, 2, size=2)
        for rule in (WEYL, RIVIER, NEW):
            qp = quantum_potential(flat2, rule, pt)
            assert qp.v_q == 0.0 and qp.bracket == 0.0


def test_quantum_potential_polar_new(polar):
    for r in (0.5, 1.0, 2.0, 5.0):
        qp = quantum_potential(polar, NEW, [r, 0.3])
        assert qp.v_q == pytest.approx(1.0 / (8 * r * r), rel=1e-12)
        # term_dd vanishes in this chart, so all rules coincide here
        assert qp.term_dd == 0.0
        assert quantum_potential(polar, WEYL, [r, 0.3]).v_q == pytest.approx(
            qp.v_q, rel=1e-12
        )


@pytest.mark.parametrize("field", TEST_FIELDS)
@pytest.mark.parametrize("rule", [WEYL, RIVIER, NEW], ids=["weyl", "rivier", "new"])
def test_bracket_matches_operator_composition(conformal, field, rule):
    """V_q from the bracket formulas equals the independent oracle built by
    composing the basic operators with jets, on a metric where the
    second-derivative term does not vanish."""
    psi = parse_expression(field, 2)
    pt = [0.9, 0.6]
    applied = ordered_kinetic_apply(conformal, rule, psi, pt)
    lap = laplace_beltrami_apply(conformal, psi, pt)
    psi0 = float(eval_value(psi, np.asarray(pt).reshape(2, 1), 2)[0])
    vq_oracle = (applied + 0.5 * lap) / psi0
    qp = quantum_potential(conformal, rule, pt)
    assert abs(qp.term_dd) > 0.05  # the discriminating term is active here
    assert vq_oracle == pytest.approx(qp.v_q, abs=1e-12)


def test_rivier_bracket_carries_double_dd(conformal):
    """The anticommutator ordering weights the d.d w term twice; composing
    (pp w + w pp)/4m directly confirms it against the one-weight variant."""
    psi = parse_expression(TEST_FIELDS[0], 2)
    pt = [0.9, 0.6]
    applied = ordered_kinetic_apply(conformal, RIVIER, psi, pt)
    lap = laplace_beltrami_apply(conformal, psi, pt)
    psi0 = float(eval_value(psi, np.asarray(pt).reshape(2, 1), 2)[0])
    vq_oracle = (applied + 0.5 * lap) / psi0
    qp = quantum_potential(conformal, RIVIER, pt)
    single_dd = -(0.5) * (qp.term_div + qp.term_dd + 0.0 + qp.term_gg)
    double_dd = -(0.5) * (qp.term_div + 2.0 * qp.term_dd + qp.term_gg)
    assert vq_oracle == pytest.approx(double_dd, abs=1e-12)
    assert abs(vq_oracle - single_dd) > 0.05


def test_bracket_linearity(conformal, rng):
    td = lambda rule, pt: quantum_potential(conformal, rule, pt).bracket
    for _ in range(5):
        pt = [rng.uniform(0.4, 5.8), rng.uniform(0.4, 5.8)]
        a = rng.uniform(-2.0, 3.0)
        ruleA = OrderingRule(a, 1.0 - a)
        b = rng.uniform(-2.0, 3.0)
        ruleB = OrderingRule(b, 1.0 - b)
        alpha = rng.uniform(-1.0, 2.0)
        mix = OrderingRule(
            alpha * ruleA.w_weyl + (1 - alpha) * ruleB.w_weyl,
            alpha * ruleA.w_rivier + (1 - alpha) * ruleB.w_rivier,
        )
        lhs = td(mix, pt)
        rhs = alpha * td(ruleA, pt) + (1 - alpha) * td(ruleB, pt)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_new_rule_is_p_w_p(curved1d, rng):
    """Applying p w p / 2m via jets equals -(1/2)(lap + bracket_new) psi
    pointwise for random 1d fields (the operator identity behind the 2:-1
    combination)."""
    fields = ["2 + sin(x1)", "exp(0.3*cos(x1))", "1/(2+cos(2*x1))"]
    for text in fields:
        psi = parse_expression(text, 1)
        for _ in range(7):
            pt = [rng.uniform(0.0, 2 * math.pi)]
            applied = ordered_kinetic_apply(curved1d, NEW, psi, pt)
            lap = laplace_beltrami_apply(curved1d, psi, pt)
            psi0 = float(eval_value(psi, np.asarray(pt).reshape(1, 1), 1)[0])
            qp = quantum_potential(curved1d, NEW, pt)
            target = -0.5 * (lap + qp.bracket * psi0)
            assert applied == pytest.approx(target, abs=1e-8)
            assert qp.bracket == pytest.approx(
                qp.term_div + qp.term_gg, abs=1e-14
            )


def test_hbar_mass_scaling(polar):
    qp = quantum_potential(polar, NEW, [2.0, 0.1], hbar=3.0, mass=0.5)
    base = quantum_potential(polar, NEW, [2.0, 0.1])
    assert qp.v_q == pytest.approx(base.v_q * 9.0 / 0.5, rel=1e-12)


@pytest.mark.parametrize("rule,ref", [(WEYL, 0.25), (RIVIER, 1 / 3), (NEW, 1 / 6)],
                         ids=["weyl", "rivier", "new"])
def test_coefficients_on_sphere(sphere, rule, ref, rng):
    for _ in range(2):
        origin = [rng.uniform(0.8, 2.2), rng.uniform(0, 2 * math.pi)]
        res = curvature_coefficient(sphere, origin, rule)
        assert res.scalar_curvature == pytest.approx(2.0, abs=1e-8)
        assert res.coefficient == pytest.approx(ref, abs=1e-6)


def test_coefficients_negative_curvature(hyperbolic):
    res = curvature_coefficient(hyperbolic, [0.9, 0.4], WEYL)
    assert res.scalar_curvature == pytest.approx(-2.0, abs=1e-8)
    assert res.coefficient == pytest.approx(0.25, abs=1e-6)


def test_coefficient_flat_flagged(flat2):
    res = curvature_coefficient(flat2, [0.3, 0.5], WEYL)
    assert res.low_curvature
    assert res.coefficient is None
    assert res.bracket_origin == pytest.approx(0.0, abs=1e-10)


def test_hamiltonian_descriptor(flat2, sphere, polar):
    d = hamiltonian_symbolic(flat2, WEYL)
    assert d.kinetic_prefactor == -0.5
    pts = np.array([[0.1, 0.4], [0.2, 0.9]]).T
    assert np.all(d.quantum_potential_at(pts) == 0.0)
    dp = hamiltonian_symbolic(polar, NEW)
    assert dp.quantum_potential_at(np.array([[2.0], [0.0]]))[0] == pytest.approx(
        1.0 / 32.0
    )
    ds = hamiltonian_symbolic(sphere, NEW)
    assert "Lap" in ds.describe()
