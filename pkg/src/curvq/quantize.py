"""Kernel quantization of phase-space symbols on periodic grids.

A phase-space symbol is a sum of terms c(xi) p_{j1} ... p_{jl} with
position-dependent coefficients.  On a periodic grid the quantization
integral discretizes to the conjugate momentum lattice; the operator is
assembled in the momentum representation, where the ordering rules act on
the lattice momenta themselves:

    <s'| M |s> = c_hat[s' - s] * ( w_weyl * g((p_s + p_s')/2)
                                 + w_rivier * (g(p_s) + g(p_s')) / 2 )

with g the momentum monomial of the term.  This is the band-limited
compression of the continuum kernel; on band-limited data it reproduces
the operator compositions of the basic position and momentum operators
exactly (multiplication operators, the canonical commutator, full
symmetrization for the midpoint rule, the anticommutator half-sum for the
endpoint rule, and p w p for the 2:-1 combination).

The final position-space matrix is conjugated by the metric quarter-power,
matching momenta -i hbar (d_j + 1/4 d_j ln w) of the weighted state space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expressions import BinOp, Const, Expr, Neg, Pow
from .grid_ops import Grid, GridError, GridOperator
from .jets import eval_value
from .metrics import MetricSpec
from .ordering import OrderingRule, parse_rule

__all__ = [
    "SymbolTerm",
    "PhaseSpaceSymbol",
    "position_symbol",
    "momentum_symbol",
    "kinetic_symbol",
    "inverse_metric_expr",
    "quantize_symbol",
    "momentum_matrix",
]

MAX_QUANTIZE_MODES = 4096


@dataclass(frozen=True)
class SymbolTerm:
    """One monomial c(xi) * p_{j1} ... p_{jl} (1-based momentum indices)."""

    coefficient: Expr
    momenta: tuple = ()


@dataclass(frozen=True)
class PhaseSpaceSymbol:
    """Polynomial-in-momentum observable f(p, xi) as a list of terms."""

    n: int
    terms: tuple

    def degree(self) -> int:
        return max((len(t.momenta) for t in self.terms), default=0)


def position_symbol(n: int, i: int) -> PhaseSpaceSymbol:
    """The coordinate observable xi^i."""
    from .expressions import Var

    return PhaseSpaceSymbol(n, (SymbolTerm(Var(i)),))


def momentum_symbol(n: int, j: int) -> PhaseSpaceSymbol:
    """The momentum observable p_j."""
    return PhaseSpaceSymbol(n, (SymbolTerm(Const(1.0), (j,)),))


def _det_expr(spec: MetricSpec):
    c = spec.component
    if spec.n == 1:
        return c(1, 1)
    if spec.n == 2:
        return BinOp(
            "-", BinOp("*", c(1, 1), c(2, 2)), BinOp("*", c(1, 2), c(1, 2))
        )
    if spec.n == 3:
        def cof(i, j, k, l):
            return BinOp("-", BinOp("*", c(i, j), c(k, l)), BinOp("*", c(i, l), c(k, j)))

        t1 = BinOp("*", c(1, 1), cof(2, 2, 3, 3))
        t2 = BinOp("*", c(1, 2), cof(2, 1, 3, 3))
        t3 = BinOp("*", c(1, 3), cof(2, 1, 3, 2))
        return BinOp("+", BinOp("-", t1, t2), t3)
    raise NotImplementedError("inverse metric expressions implemented for n <= 3")


def inverse_metric_expr(spec: MetricSpec, i: int, j: int) -> Expr:
    """Expression tree for the inverse-metric component w^{ij} (Cramer)."""
    n = spec.n
    det = _det_expr(spec)
    c = spec.component
    if n == 1:
        return BinOp("/", Const(1.0), c(1, 1))
    if n == 2:
        other = {1: 2, 2: 1}
        if i == j:
            num = c(other[i], other[i])
        else:
            num = Neg(c(1, 2))
        return BinOp("/", num, det)
    if n == 3:
        rows = [r for r in (1, 2, 3) if r != i]
        cols = [s for s in (1, 2, 3) if s != j]
        minor = BinOp(
            "-",
            BinOp("*", c(rows[0], cols[0]), c(rows[1], cols[1])),
            BinOp("*", c(rows[0], cols[1]), c(rows[1], cols[0])),
        )
        signed = minor if (i + j) % 2 == 0 else Neg(minor)
        return BinOp("/", signed, det)
    raise NotImplementedError("inverse metric expressions implemented for n <= 3")


def kinetic_symbol(spec: MetricSpec, mass: float = 1.0) -> PhaseSpaceSymbol:
    """The classical kinetic Hamiltonian w^{ij}(xi) p_i p_j / (2m)."""
    terms = []
    for i in range(1, spec.n + 1):
        for j in range(i, spec.n + 1):
            factor = (1.0 if i == j else 2.0) / (2.0 * mass)
            coeff = BinOp("*", Const(factor), inverse_metric_expr(spec, i, j))
            terms.append(SymbolTerm(coeff, (i, j)))
    return PhaseSpaceSymbol(spec.n, tuple(terms))


def _mode_lattice(grid: Grid, hbar: float):
    """Flat arrays of momentum values (n, M) and per-dim mode indices."""
    qs = [np.fft.fftfreq(N, d=1.0 / N).astype(int) for N in grid.shape]
    lengths = [hi - lo for lo, hi in grid.bounds]
    mesh = np.meshgrid(*qs, indexing="ij")
    q_flat = np.stack([m.ravel() for m in mesh], axis=0)
    p_flat = np.stack(
        [2.0 * math.pi * hbar * q_flat[d] / lengths[d] for d in range(grid.n)], axis=0
    )
    return q_flat, p_flat


def _dft_matrices(grid: Grid):
    """Forward (values -> coefficients) and inverse DFT matrices."""
    F = None
    for N in grid.shape:
        f = np.fft.fft(np.eye(N)) / N
        F = f if F is None else np.kron(F, f)
    Fi = None
    for N in grid.shape:
        fi = np.fft.ifft(np.eye(N)) * N
        Fi = fi if Fi is None else np.kron(Fi, fi)
    return F, Fi


def quantize_symbol(symbol: PhaseSpaceSymbol, rule, grid: Grid,
                    hbar: float = 1.0) -> GridOperator:
    """Quantize a polynomial phase-space symbol under an ordering rule.

    Requires a fully periodic grid (the momentum integral becomes the exact
    conjugate lattice sum).  Returns a dense operator acting on node values,
    Hermitian under the grid's weighted inner product for real symbols.
    """
    rule = parse_rule(rule)
    if any(kind != "periodic" for kind in grid.boundary):
        raise GridError("kernel quantization needs a fully periodic grid")
    if symbol.n != grid.n:
        raise GridError("symbol dimension does not match the grid")
    M = grid.size
    if M > MAX_QUANTIZE_MODES:
        raise GridError(f"quantization capped at {MAX_QUANTIZE_MODES} modes")

    shape = grid.shape
    _, P = _mode_lattice(grid, hbar)

    # r-index (output mode - input mode, wrapped) flattened per pair
    idx = np.unravel_index(np.arange(M), shape)
    r_multi = tuple(
        (idx[d][:, None] - idx[d][None, :]) % shape[d] for d in range(grid.n)
    )
    r_flat = np.ravel_multi_index(r_multi, shape)

    p_in = P[:, None, :]   # broadcast over output modes
    p_out = P[:, :, None]
    p_mid = 0.5 * (p_in + p_out)

    M_mom = np.zeros((M, M), dtype=complex)
    for term in symbol.terms:
        c_vals = eval_value(term.coefficient, grid.nodes, grid.n)
        c_vals = np.broadcast_to(c_vals, (M,))
        chat = np.fft.fftn(c_vals.reshape(shape)).ravel() / M
        if term.momenta:
            g_mid = np.ones((M, M))
            g_in = np.ones((M, M))
            g_out = np.ones((M, M))
            for j in term.momenta:
                g_mid = g_mid * p_mid[j - 1]
                g_in = g_in * np.broadcast_to(p_in[j - 1], (M, M))
                g_out = g_out * np.broadcast_to(p_out[j - 1], (M, M))
            combo = rule.w_weyl * g_mid + rule.w_rivier * 0.5 * (g_in + g_out)
        else:
            combo = 1.0
        M_mom += chat[r_flat] * combo

    F, Fi = _dft_matrices(grid)
    M_pos = Fi @ M_mom @ F

    quarter = grid.sqrt_det**0.5
    M_pos = (M_pos / quarter[:, None]) * quarter[None, :]
    return GridOperator(matrix=M_pos, grid=grid, label=f"Q[{rule.label or 'custom'}]")


def momentum_matrix(grid: Grid, j: int, hbar: float = 1.0) -> GridOperator:
    """Grid matrix of the basic momentum operator p_j."""
    return quantize_symbol(momentum_symbol(grid.n, j), "weyl", grid, hbar)
