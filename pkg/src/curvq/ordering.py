"""Ordering rules, quantum potentials, and curvature-coefficient extraction.

An ordering rule is a normalized pair of weights over the two classical
Hermitian orderings (full symmetrization and endpoint anticommutator).  The
kinetic Hamiltonian quantized under a rule takes the form

    H = -(hbar^2 / 2m) (Lap + bracket(rule)),

where ``bracket`` is a chart-dependent scalar built from three terms:

    term_div = 1/2 d_j(w^{ij} gamma_i)
    term_dd  = 1/4 d_i d_j w^{ij}
    term_gg  = 1/4 w^{ij} gamma_i gamma_j

with weights (1, 1, 1) for the symmetrized ordering, (1, 2, 1) for the
anticommutator ordering, and (1, 0, 1) for the distinguished 2:-1
combination, whose operator form is p_i w^{ij} p_j / 2m.  The quantum
potential is V_q = -(hbar^2 / 2m) * bracket.

At the origin of geodesic normal coordinates the bracket reduces to a pure
multiple of the scalar curvature; :func:`curvature_coefficient` measures
that multiple numerically through the full normal-chart pipeline.  It is
reported in the curvature sign convention of the quantization literature
(which is opposite to this package's sphere-positive geometry convention),
so the symmetrized, anticommutator and combined rules yield +1/4, +1/3 and
+1/6 on the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressions import Expr
from .geometry import MetricJets, curvature, metric_jets
from .geodesics import NormalChart, normal_coordinates
from .jets import eval_jet
from .metrics import MetricSpec

__all__ = [
    "OrderingRule",
    "WEYL",
    "RIVIER",
    "NEW",
    "parse_rule",
    "QuantumPotentialBreakdown",
    "momentum_operator_apply",
    "bracket_terms",
    "quantum_potential",
    "ordered_kinetic_apply",
    "CoefficientResult",
    "curvature_coefficient",
    "HamiltonianDescriptor",
    "hamiltonian_symbolic",
]


@dataclass(frozen=True)
class OrderingRule:
    """Normalized weights over the symmetrized and anticommutator orderings."""

    w_weyl: float
    w_rivier: float
    label: str = ""

    def __post_init__(self):
        if abs(self.w_weyl + self.w_rivier - 1.0) > 1e-12:
            raise ValueError(
                f"rule weights must sum to 1, got {self.w_weyl} + {self.w_rivier}"
            )

    @property
    def dd_weight(self) -> float:
        # term_dd enters the symmetrized bracket once and the anticommutator
        # bracket twice (verified against direct operator application)
        return self.w_weyl + 2.0 * self.w_rivier


WEYL = OrderingRule(1.0, 0.0, "weyl")
RIVIER = OrderingRule(0.0, 1.0, "rivier")
NEW = OrderingRule(2.0, -1.0, "new")

_PRESET_RULES = {"weyl": WEYL, "rivier": RIVIER, "new": NEW}


def parse_rule(text) -> OrderingRule:
    """Resolve a rule label or explicit 'w_weyl,w_rivier' weight pair."""
    if isinstance(text, OrderingRule):
        return text
    key = str(text).strip().lower()
    if key in _PRESET_RULES:
        return _PRESET_RULES[key]
    parts = key.split(",")
    if len(parts) == 2:
        try:
            w1, w2 = float(parts[0]), float(parts[1])
        except ValueError:
            raise ValueError(f"unrecognized ordering rule {text!r}") from None
        for name, preset in _PRESET_RULES.items():
            if abs(w1 - preset.w_weyl) < 1e-12 and abs(w2 - preset.w_rivier) < 1e-12:
                return preset
        return OrderingRule(w1, w2, label=f"{w1:g},{w2:g}")
    raise ValueError(f"unrecognized ordering rule {text!r}")


@dataclass(frozen=True)
class QuantumPotentialBreakdown:
    term_div: float
    term_dd: float
    term_gg: float
    bracket: float
    v_q: float
    rule: OrderingRule


def momentum_operator_apply(spec: MetricSpec, j: int, psi: Expr, point,
                            hbar: float = 1.0) -> complex:
    """Apply the basic momentum operator -i hbar (d_j + 1/4 d_j ln w) to a
    scalar field at a point (j is 1-based)."""
    pts = np.asarray(point, dtype=float).reshape(spec.n, 1)
    mj = metric_jets(spec, pts, order=1)
    jet = eval_jet(psi, pts, spec.n, order=1)
    dlnw = mj.lndet_d1[j - 1, 0]
    return -1j * hbar * (jet.grad[j - 1, 0] + 0.25 * dlnw * jet.value[0])


def bracket_terms(spec: MetricSpec, pts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three bracket building blocks on an (n, B) batch of points."""
    pts = np.asarray(pts, dtype=float)
    mj = metric_jets(spec, pts, order=2)
    return _bracket_terms_from_jets(mj)


def _bracket_terms_from_jets(mj: MetricJets):
    gam = mj.contracted                 # gamma_i
    dgam = 0.5 * mj.lndet_d2            # d_k gamma_i (symmetric)
    term_div = 0.5 * (
        np.einsum("jij...,i...->...", mj.up_d1, gam)
        + np.einsum("ij...,ji...->...", mj.up, dgam)
    )
    term_dd = 0.25 * np.einsum("ijij...->...", mj.up_d2)
    term_gg = 0.25 * np.einsum("ij...,i...,j...->...", mj.up, gam, gam)
    return term_div, term_dd, term_gg


def _combine(rule: OrderingRule, term_div, term_dd, term_gg):
    return term_div + rule.dd_weight * term_dd + term_gg


def quantum_potential(spec: MetricSpec, rule: OrderingRule, point,
                      hbar: float = 1.0, mass: float = 1.0) -> QuantumPotentialBreakdown:
    """Quantum potential of the rule-ordered kinetic Hamiltonian at a point."""
    rule = parse_rule(rule)
    pts = np.asarray(point, dtype=float).reshape(spec.n, 1)
    td, tdd, tgg = bracket_terms(spec, pts)
    bracket = float(_combine(rule, td, tdd, tgg)[0])
    return QuantumPotentialBreakdown(
        term_div=float(td[0]),
        term_dd=float(tdd[0]),
        term_gg=float(tgg[0]),
        bracket=bracket,
        v_q=-(hbar * hbar) / (2.0 * mass) * bracket,
        rule=rule,
    )


def quantum_potential_batch(spec: MetricSpec, rule: OrderingRule, pts,
                            hbar: float = 1.0, mass: float = 1.0) -> np.ndarray:
    """V_q values on an (n, B) batch (used by grid assembly)."""
    rule = parse_rule(rule)
    td, tdd, tgg = bracket_terms(spec, pts)
    return -(hbar * hbar) / (2.0 * mass) * _combine(rule, td, tdd, tgg)


# ---------------------------------------------------------------------------
# direct operator application (independent oracle for the brackets)

def ordered_kinetic_apply(spec: MetricSpec, rule: OrderingRule, psi: Expr, point,
                          hbar: float = 1.0, mass: float = 1.0) -> float:
    """Apply the rule-ordered kinetic Hamiltonian to a real scalar field by
    composing the basic operators with jets (no bracket formulas involved).

    The symmetrized ordering is (1/8m)(pp w + 2 p w p + w pp), the
    anticommutator ordering (1/4m)(pp w + w pp), with p the basic momentum
    operator; a general rule combines the two linearly.
    """
    rule = parse_rule(rule)
    pts = np.asarray(point, dtype=float).reshape(spec.n, -1)
    mj = metric_jets(spec, pts, order=2)
    jet = eval_jet(psi, pts, spec.n, order=2)
    psi_v, psi_g, psi_h = jet.value, jet.grad, jet.hess

    W, Wd1, Wd2 = mj.up, mj.up_d1, mj.up_d2
    gam = mj.contracted
    dgam = 0.5 * mj.lndet_d2

    # u^{ij} = W^{ij} psi and its derivatives
    u = W * psi_v
    u_d1 = Wd1 * psi_v + np.einsum("ij...,k...->kij...", W, psi_g)
    u_d2 = (
        Wd2 * psi_v
        + np.einsum("kij...,l...->klij...", Wd1, psi_g)
        + np.einsum("lij...,k...->klij...", Wd1, psi_g)
        + np.einsum("ij...,kl...->klij...", W, psi_h)
    )

    # a = sum_ij D_i D_j (W^{ij} psi)
    a = (
        np.einsum("ijij...->...", u_d2)
        + 0.5 * np.einsum("ij...,ij...->...", dgam, u)
        + 0.5 * np.einsum("j...,iij...->...", gam, u_d1)
        + 0.5 * np.einsum("i...,jij...->...", gam, u_d1)
        + 0.25 * np.einsum("i...,j...,ij...->...", gam, gam, u)
    )

    # v^i = W^{ij}(psi_j + gamma_j psi / 2); b = sum_i D_i v^i
    w_arg = psi_g + 0.5 * gam * psi_v
    v = np.einsum("ij...,j...->i...", W, w_arg)
    dw_arg = psi_h + 0.5 * (dgam * psi_v + np.einsum("j...,k...->kj...", gam, psi_g))
    v_d1 = np.einsum("kij...,j...->ki...", Wd1, w_arg) + np.einsum(
        "ij...,kj...->ki...", W, dw_arg
    )
    b = np.einsum("ii...->...", v_d1) + 0.5 * np.einsum("i...,i...->...", gam, v)

    # c = sum_ij W^{ij} D_i D_j psi
    ddpsi = (
        psi_h
        + 0.5 * dgam * psi_v
        + 0.5 * np.einsum("j...,i...->ij...", gam, psi_g)
        + 0.5 * np.einsum("i...,j...->ij...", gam, psi_g)
        + 0.25 * np.einsum("i...,j...->ij...", gam, gam) * psi_v
    )
    c = np.einsum("ij...,ij...->...", W, ddpsi)

    weyl_part = (a + 2.0 * b + c) / 8.0
    rivier_part = (a + c) / 4.0
    combo = rule.w_weyl * weyl_part + rule.w_rivier * rivier_part
    out = -(hbar * hbar) / mass * combo
    return float(out[0]) if out.shape == (1,) else out


# ---------------------------------------------------------------------------
# curvature coefficient via normal coordinates

@dataclass(frozen=True)
class CoefficientResult:
    coefficient: float | None
    bracket_origin: float
    scalar_curvature: float
    rule: OrderingRule
    low_curvature: bool
    term_div: float = 0.0
    term_dd: float = 0.0
    term_gg: float = 0.0


def _pullback_metric(chart: NormalChart, Y: np.ndarray) -> np.ndarray:
    """Pullback metric g_ab(y) = J^i_a w_ij(xi(y)) J^j_b on an (n, B) batch."""
    xi, J = chart.forward_with_jacobian(Y)
    mj = metric_jets(chart.spec, xi, order=0)
    return np.einsum("ia...,ij...,jb...->ab...", J, mj.low, J)


def _normal_bracket_terms(chart: NormalChart, h: float):
    """Bracket terms at y = 0 from a finite-difference quadratic model of
    the pullback metric (step h, no extrapolation)."""
    n = chart.spec.n
    cols = [np.zeros(n)]
    for c in range(n):
        cols.append(h * _unit(n, c))
        cols.append(-h * _unit(n, c))
    pairs = [(c, d) for c in range(n) for d in range(c + 1, n)]
    for c, d in pairs:
        for sc, sd in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            cols.append(sc * h * _unit(n, c) + sd * h * _unit(n, d))
    Y = np.stack(cols, axis=1)
    g = _pullback_metric(chart, Y)

    W = np.moveaxis(np.linalg.inv(np.moveaxis(g, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    lnd = np.log(np.linalg.det(np.moveaxis(g, (0, 1), (-2, -1))))

    def d1(F):
        out = np.zeros((n,) + F.shape[:-1])
        for c in range(n):
            out[c] = (F[..., 1 + 2 * c] - F[..., 2 + 2 * c]) / (2.0 * h)
        return out

    def d2(F):
        out = np.zeros((n, n) + F.shape[:-1])
        for c in range(n):
            out[c, c] = (F[..., 1 + 2 * c] + F[..., 2 + 2 * c] - 2.0 * F[..., 0]) / (h * h)
        base = 1 + 2 * n
        for idx, (c, d) in enumerate(pairs):
            o = base + 4 * idx
            out[c, d] = out[d, c] = (
                F[..., o] - F[..., o + 1] - F[..., o + 2] + F[..., o + 3]
            ) / (4.0 * h * h)
        return out

    W0 = W[..., 0]
    Wd1 = d1(W)
    Wd2 = d2(W)
    gam = 0.5 * d1(lnd)
    dgam = 0.5 * d2(lnd)

    term_div = 0.5 * (np.einsum("jij,i->", Wd1, gam) + np.einsum("ij,ji->", W0, dgam))
    term_dd = 0.25 * np.einsum("ijij->", Wd2)
    term_gg = 0.25 * float(gam @ W0 @ gam)
    return float(term_div), float(term_dd), float(term_gg)


def _unit(n, c):
    v = np.zeros(n)
    v[c] = 1.0
    return v


def curvature_coefficient(spec: MetricSpec, origin, rule: OrderingRule,
                          fd_step: float = 0.02,
                          low_curvature_threshold: float = 1e-8) -> CoefficientResult:
    """Ratio of the ordering bracket at a normal-chart origin to the scalar
    curvature there.

    The metric is pulled back to normal coordinates through the exponential
    map (differentiated by Richardson-extrapolated central differences), the
    bracket is evaluated exactly at y = 0 where the contracted Christoffels
    vanish, and the ratio to R is formed in the curvature convention of the
    quantization literature (sphere-negative), reported positive: 1/4 for
    the symmetrized rule, 1/3 for the anticommutator rule, 1/6 for the
    2:-1 combination.

    If |R| is below ``low_curvature_threshold`` the ratio is meaningless;
    the raw bracket is returned with ``low_curvature=True``.
    """
    rule = parse_rule(rule)
    chart = normal_coordinates(spec, origin)
    terms_h = _normal_bracket_terms(chart, fd_step)
    terms_h2 = _normal_bracket_terms(chart, fd_step / 2.0)
    td, tdd, tgg = ((4.0 * b - a) / 3.0 for a, b in zip(terms_h, terms_h2))
    bracket = _combine(rule, td, tdd, tgg)
    R = curvature(spec, origin).scalar
    if abs(R) < low_curvature_threshold:
        return CoefficientResult(None, bracket, R, rule, True, td, tdd, tgg)
    return CoefficientResult(-bracket / R, bracket, R, rule, False, td, tdd, tgg)


# ---------------------------------------------------------------------------
# symbolic Hamiltonian descriptor

@dataclass(frozen=True)
class HamiltonianDescriptor:
    """H = -(hbar^2/2m) Lap + V_q(rule) as data consumed by grid builders."""

    spec: MetricSpec
    rule: OrderingRule
    hbar: float = 1.0
    mass: float = 1.0

    @property
    def kinetic_prefactor(self) -> float:
        return -(self.hbar**2) / (2.0 * self.mass)

    def quantum_potential_at(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(self.spec.n, 1)
        return quantum_potential_batch(self.spec, self.rule, pts, self.hbar, self.mass)

    def describe(self) -> str:
        return (
            f"H = -(hbar^2/2m) Lap + V_q[{self.rule.label or 'custom'}]"
            f" (hbar={self.hbar:g}, m={self.mass:g}) on {self.spec.name}"
        )


def hamiltonian_symbolic(spec: MetricSpec, rule: OrderingRule,
                         hbar: float = 1.0, mass: float = 1.0) -> HamiltonianDescriptor:
    """Descriptor of the canonical rule-ordered Hamiltonian."""
    return HamiltonianDescriptor(spec, parse_rule(rule), hbar, mass)
