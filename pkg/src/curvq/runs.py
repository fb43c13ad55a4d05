"""Command cores shared by the CLI and the HTTP service.

Every command takes plain keyword parameters and returns a list of flat
record dictionaries (insertion-ordered, scalars only), so the callers only
differ in how they parse inputs and render outputs.  Commands are
deterministic for fixed parameters; anything randomized takes an explicit
seed.
"""

from __future__ import annotations

import numpy as np

from .grid_ops import Grid, build_grid, eigen_spectrum, evolve, hamiltonian_matrix
from .geometry import christoffel, curvature, metric_at
from .metrics import MetricSpec
from .ordering import (
    curvature_coefficient,
    parse_rule,
    quantum_potential,
)
from .propagator import compose_propagator
from .quantize import kinetic_symbol, quantize_symbol

__all__ = [
    "run_geometry",
    "run_potential",
    "run_coefficient",
    "run_spectrum",
    "run_evolve",
    "run_pathint",
    "REFERENCE_COEFFICIENTS",
]

REFERENCE_COEFFICIENTS = {"weyl": 0.25, "rivier": 1.0 / 3.0, "new": 1.0 / 6.0}


def _point_record(spec: MetricSpec, point) -> dict:
    rec = {}
    for k, x in enumerate(point, start=1):
        rec[f"x{k}"] = float(x)
    return rec


def run_geometry(spec: MetricSpec, points) -> list[dict]:
    """Metric data, contracted Christoffels and scalar curvature per point."""
    records = []
    for pt in points:
        pt = spec.reduce_point(pt)
        spec.validate_point(pt)
        mv = metric_at(spec, pt)
        ch = christoffel(spec, pt)
        cu = curvature(spec, pt)
        rec = _point_record(spec, pt)
        rec["det"] = mv.det
        rec["sqrt_det"] = mv.sqrt_det
        for k in range(spec.n):
            rec[f"gamma_{k + 1}"] = float(ch.contracted[k])
        rec["scalar_curvature"] = cu.scalar
        records.append(rec)
    return records


def run_potential(spec: MetricSpec, rules, points, hbar: float = 1.0,
                  mass: float = 1.0) -> list[dict]:
    """Quantum-potential breakdown per point per ordering rule."""
    records = []
    for pt in points:
        pt = spec.reduce_point(pt)
        spec.validate_point(pt)
        for rule in rules:
            rule = parse_rule(rule)
            qp = quantum_potential(spec, rule, pt, hbar=hbar, mass=mass)
            rec = _point_record(spec, pt)
            rec["rule"] = rule.label or f"{rule.w_weyl:g},{rule.w_rivier:g}"
            rec["term_div"] = qp.term_div
            rec["term_dd"] = qp.term_dd
            rec["term_gg"] = qp.term_gg
            rec["bracket"] = qp.bracket
            rec["v_q"] = qp.v_q
            records.append(rec)
    return records


def run_coefficient(spec: MetricSpec, rules, points, fd_step: float = 0.02) -> list[dict]:
    """Curvature coefficients per origin per rule, with reference values."""
    records = []
    for pt in points:
        pt = spec.reduce_point(pt)
        spec.validate_point(pt)
        for rule in rules:
            rule = parse_rule(rule)
            res = curvature_coefficient(spec, pt, rule, fd_step=fd_step)
            rec = _point_record(spec, pt)
            rec["rule"] = rule.label or f"{rule.w_weyl:g},{rule.w_rivier:g}"
            rec["scalar_curvature"] = res.scalar_curvature
            rec["bracket_origin"] = res.bracket_origin
            if res.low_curvature:
                rec["coefficient"] = float("nan")
                rec["flag"] = "R below threshold"
            else:
                rec["coefficient"] = res.coefficient
                ref = REFERENCE_COEFFICIENTS.get(rule.label)
                if ref is not None:
                    rec["reference"] = ref
                    rec["deviation"] = res.coefficient - ref
            records.append(rec)
    return records


def _hamiltonian_for(spec: MetricSpec, grid: Grid, vq_mode: str, rule,
                     hbar: float, mass: float):
    if vq_mode == "none":
        return hamiltonian_matrix(spec, None, grid, hbar=hbar, mass=mass)
    if vq_mode == "dewitt":
        shift = lambda pts: -(hbar * hbar) / (2.0 * mass) * np.array(
            [curvature(spec, pts[:, i]).scalar / 6.0 for i in range(pts.shape[1])]
        )
        return hamiltonian_matrix(spec, None, grid, hbar=hbar, mass=mass,
                                  extra_potential=shift)
    return hamiltonian_matrix(spec, parse_rule(rule), grid, hbar=hbar, mass=mass)


def run_spectrum(spec: MetricSpec, grid: Grid, k: int, rule="new",
                 vq_mode: str = "rule", hbar: float = 1.0,
                 mass: float = 1.0) -> list[dict]:
    """k smallest eigenvalues of the discretized Hamiltonian."""
    op = _hamiltonian_for(spec, grid, vq_mode, rule, hbar, mass)
    vals = eigen_spectrum(op, k)
    return [
        {"index": i, "eigenvalue": float(v)} for i, v in enumerate(vals)
    ]


def _initial_state(grid: Grid, kind: str, center=None, sigma=None, kvec=None):
    if kind != "gaussian":
        raise ValueError(f"unknown initial state {kind!r}")
    x = grid.nodes
    if center is None:
        center = [0.5 * (lo + hi) for lo, hi in grid.bounds]
    if sigma is None:
        sigma = 0.1 * min(hi - lo for lo, hi in grid.bounds)
    if kvec is None:
        kvec = [0.0] * grid.n
    arg = sum((x[d] - center[d]) ** 2 for d in range(grid.n)) / (2.0 * sigma**2)
    phase = sum(kvec[d] * x[d] for d in range(grid.n))
    psi = np.exp(-arg) * np.exp(1j * np.asarray(phase, dtype=float))
    return psi / grid.norm(psi)


def run_evolve(spec: MetricSpec, grid: Grid, rule, t: float, steps: int,
               psi0: str = "gaussian", center=None, sigma=None, kvec=None,
               vq_mode: str = "rule", hbar: float = 1.0, mass: float = 1.0,
               report_every: int = 1) -> list[dict]:
    """Evolve an initial state and report norm/energy/fidelity series."""
    op = _hamiltonian_for(spec, grid, vq_mode, rule, hbar, mass)
    if psi0 == "ground":
        import scipy.linalg as sla

        w = np.sqrt(grid.weights)
        S = (w[:, None] * op.matrix) / w[None, :]
        S = 0.5 * (S + S.conj().T)
        _, vecs = sla.eigh(S, subset_by_index=[0, 0])
        state = (vecs[:, 0] / w).astype(complex)
        state /= grid.norm(state)
    else:
        state = _initial_state(grid, psi0, center, sigma, kvec)
    initial = state.copy()
    records = []
    dt = t / steps
    for step in range(steps + 1):
        if step % report_every == 0 or step == steps:
            energy = float(np.real(grid.inner(state, op.apply(state))))
            records.append(
                {
                    "step": step,
                    "t": step * dt,
                    "norm": grid.norm(state),
                    "energy": energy,
                    "fidelity": float(abs(grid.inner(initial, state))),
                }
            )
        if step < steps:
            state = evolve(op, state, dt, 1, hbar=hbar)
    return records


def run_pathint(spec: MetricSpec, grid: Grid, rule, t: float, slice_counts,
                hbar: float = 1.0, mass: float = 1.0,
                oracle_steps: int = 4000) -> list[dict]:
    """Distance between the composed sliced kernel and direct evolution.

    The reference evolution uses the kernel-quantized kinetic Hamiltonian of
    the same ordering rule (the canonical operator the slices discretize),
    stepped with Crank-Nicolson fine enough to sit below the slicing error.
    """
    rule = parse_rule(rule)
    op = quantize_symbol(kinetic_symbol(spec, mass=mass), rule, grid, hbar=hbar)
    psi0 = _initial_state(grid, "gaussian", kvec=[3.0 * 2.0 * np.pi /
                                                 (grid.bounds[d][1] - grid.bounds[d][0])
                                                 for d in range(grid.n)])
    reference = evolve(op, psi0, t, oracle_steps, hbar=hbar)
    records = []
    dists = []
    for N in slice_counts:
        kern = compose_propagator(spec, rule, grid, t, int(N), hbar=hbar, mass=mass)
        dist = grid.norm(kern.apply(psi0) - reference)
        dists.append(dist)
        records.append(
            {
                "slices": int(N),
                "l2_distance": dist,
                "constant_response_norm": kern.diagnostics["constant_response_norm"],
            }
        )
    if len(slice_counts) >= 2 and all(d > 0 for d in dists):
        slope = np.polyfit(np.log(np.asarray(slice_counts, dtype=float)),
                           np.log(np.asarray(dists)), 1)[0]
        records.append({"fitted_order": float(-slope)})
    return records
