"""Structured grids, Hamiltonian discretization, spectra, time evolution.

Grids are uniform per dimension with three boundary treatments:

* ``periodic``  - nodes cover [lo, hi) and wrap;
* ``dirichlet`` - interior nodes with hard walls one step outside the first
  and last node (wavefunction pinned to zero at the walls);
* ``natural``   - half-offset nodes with zero-flux closure at the boundary
  faces.  This is the correct treatment at degenerate chart edges such as
  sphere poles, where the flux coefficient vanishes identically; at regular
  edges it acts as a reflecting wall.

The kinetic operator is discretized in divergence form with half-node flux
coefficients, which makes every Hamiltonian exactly Hermitian under the
weighted inner product <psi, phi> = sum_j w_j conj(psi_j) phi_j with
w_j = sqrt(det w)(node_j) * cell volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import MetricEvaluationError, metric_jets
from .metrics import MetricSpec
from .ordering import OrderingRule, parse_rule, quantum_potential_batch

__all__ = [
    "Grid",
    "GridError",
    "GridOperator",
    "build_grid",
    "hamiltonian_matrix",
    "kinetic_matrix",
    "eigen_spectrum",
    "evolve",
]

MAX_NODES = 12_000
BOUNDARY_KINDS = ("periodic", "dirichlet", "natural")


class GridError(ValueError):
    """Invalid grid construction request."""


@dataclass
class Grid:
    """Uniform structured grid over a metric chart."""

    spec: MetricSpec
    points_per_dim: tuple
    boundary: tuple
    bounds: tuple            # (lo, hi) actually used per dimension
    axes: tuple              # per-dim node coordinate arrays
    nodes: np.ndarray        # (n, M) flattened nodes
    steps: tuple
    cell_volume: float
    sqrt_det: np.ndarray     # sqrt(det w) at nodes
    weights: np.ndarray      # sqrt_det * cell_volume

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def shape(self) -> tuple:
        return self.points_per_dim

    @property
    def size(self) -> int:
        return int(np.prod(self.points_per_dim))

    def inner(self, psi, phi) -> complex:
        return complex(np.sum(self.weights * np.conj(psi) * phi))

    def norm(self, psi) -> float:
        return float(np.sqrt(np.real(self.inner(psi, psi))))


@dataclass
class GridOperator:
    """Dense operator over grid nodes, acting on wavefunction samples."""

    matrix: np.ndarray
    grid: Grid
    label: str = ""

    def apply(self, psi) -> np.ndarray:
        return self.matrix @ np.asarray(psi)

    def hermiticity_defect(self) -> float:
        """Max deviation from Hermiticity under the weighted inner product."""
        W = self.grid.weights
        A = W[:, None] * self.matrix
        return float(np.abs(A - A.conj().T).max())


def _node_axis(lo: float, hi: float, count: int, kind: str) -> tuple[np.ndarray, float]:
    if kind == "periodic":
        h = (hi - lo) / count
        return lo + h * np.arange(count), h
    if kind == "dirichlet":
        h = (hi - lo) / (count + 1)
        return lo + h * (1.0 + np.arange(count)), h
    if kind == "natural":
        h = (hi - lo) / count
        return lo + h * (0.5 + np.arange(count)), h
    raise GridError(f"unknown boundary kind {kind!r}")


def build_grid(spec: MetricSpec, points_per_dim, boundary=None, ranges=None) -> Grid:
    """Construct a grid over the chart of ``spec``.

    Parameters
    ----------
    points_per_dim : int or sequence of int
        Node count per dimension (at least 8 each).
    boundary : str or sequence of str, optional
        'periodic', 'dirichlet' or 'natural' per dimension.  Defaults to
        'periodic' for periodic coordinates and 'dirichlet' otherwise.
    ranges : sequence of (lo, hi), optional
        Explicit bounds per dimension; mandatory wherever the metric's
        coordinate range is infinite.
    """
    n = spec.n
    if isinstance(points_per_dim, int):
        points_per_dim = (points_per_dim,) * n
    points_per_dim = tuple(int(p) for p in points_per_dim)
    if len(points_per_dim) != n:
        raise GridError(f"need {n} per-dimension point counts")
    if any(p < 8 for p in points_per_dim):
        raise GridError("need at least 8 points per dimension")
    if int(np.prod(points_per_dim)) > MAX_NODES:
        raise GridError(f"grid exceeds the dense-operator cap of {MAX_NODES} nodes")

    if boundary is None:
        boundary = tuple(
            "periodic" if rng.periodic else "dirichlet" for rng in spec.ranges
        )
    elif isinstance(boundary, str):
        boundary = (boundary,) * n
    boundary = tuple(boundary)
    for kind in boundary:
        if kind not in BOUNDARY_KINDS:
            raise GridError(f"unknown boundary kind {kind!r}")

    bounds = []
    for k in range(n):
        if ranges is not None and ranges[k] is not None:
            lo, hi = float(ranges[k][0]), float(ranges[k][1])
        else:
            rng = spec.ranges[k]
            lo, hi = rng.low, rng.high
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise GridError(
                f"coordinate x{k + 1} has an infinite range; pass explicit bounds"
            )
        if not lo < hi:
            raise GridError(f"empty range for x{k + 1}: [{lo}, {hi}]")
        bounds.append((lo, hi))

    axes, steps = [], []
    for k in range(n):
        ax, h = _node_axis(bounds[k][0], bounds[k][1], points_per_dim[k], boundary[k])
        axes.append(ax)
        steps.append(h)

    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=0)

    # metric validation at nodes; for dirichlet dims also at the walls, which
    # is where degenerate chart points (e.g. a polar origin) get caught
    try:
        mj = metric_jets(spec, nodes, order=0)
    except MetricEvaluationError as err:
        raise GridError(f"metric invalid on grid nodes: {err}") from err
    for k in range(n):
        if boundary[k] != "dirichlet":
            continue
        for wall in bounds[k]:
            probe = nodes[:, : max(1, nodes.shape[1] // 7)].copy()
            probe[k] = wall
            try:
                metric_jets(spec, probe, order=0)
            except MetricEvaluationError as err:
                raise GridError(
                    f"metric degenerate on the dirichlet wall x{k + 1}={wall:g}: {err}"
                ) from err

    cell_volume = float(np.prod(steps))
    sqrt_det = mj.sqrt_det
    return Grid(
        spec=spec,
        points_per_dim=points_per_dim,
        boundary=boundary,
        bounds=tuple(bounds),
        axes=tuple(axes),
        nodes=nodes,
        steps=tuple(steps),
        cell_volume=cell_volume,
        sqrt_det=sqrt_det,
        weights=sqrt_det * cell_volume,
    )


# ---------------------------------------------------------------------------
# operator assembly

def _face_coefficient(grid: Grid, dim: int) -> np.ndarray:
    """sqrt(det w) * w^{dim,dim} at the up-faces of every node."""
    faces = grid.nodes.copy()
    faces[dim] += grid.steps[dim] / 2.0
    # reduce periodic coordinates so face evaluation stays in range
    for k, rng in enumerate(grid.spec.ranges):
        if rng.periodic:
            faces[k] = rng.reduce(faces[k])
    mj = metric_jets(grid.spec, faces, order=0)
    return mj.sqrt_det * mj.up[dim, dim]


def kinetic_matrix(grid: Grid) -> np.ndarray:
    """Divergence-form discretization of the Laplace-Beltrami operator."""
    n, M = grid.n, grid.size
    shape = grid.shape
    L = np.zeros((M, M))
    inv_sq = 1.0 / grid.sqrt_det

    node_mj = metric_jets(grid.spec, grid.nodes, order=0)

    for d in range(n):
        h = grid.steps[d]
        a_up = _face_coefficient(grid, d).reshape(shape)
        idx = np.arange(M).reshape(shape)
        kind = grid.boundary[d]

        up_idx = np.roll(idx, -1, axis=d)
        dn_a = np.roll(a_up, 1, axis=d)

        flat = idx.ravel()
        a_up_f = a_up.ravel()
        a_dn_f = dn_a.ravel()
        up_f = up_idx.ravel()
        dn_f = np.roll(idx, 1, axis=d).ravel()

        first = (np.indices(shape)[d] == 0).ravel()
        last = (np.indices(shape)[d] == shape[d] - 1).ravel()

        use_up = np.ones(M, dtype=bool)
        use_dn = np.ones(M, dtype=bool)
        keep_up_flux = np.ones(M, dtype=bool)
        keep_dn_flux = np.ones(M, dtype=bool)
        if kind != "periodic":
            use_up[last] = False
            use_dn[first] = False
            if kind == "dirichlet":
                # wall flux survives with psi_wall = 0; wall faces sit half a
                # step beyond the end nodes
                wall_up = grid.nodes[:, last].copy()
                wall_up[d] = grid.bounds[d][1] - grid.steps[d] / 2.0
                wall_dn = grid.nodes[:, first].copy()
                wall_dn[d] = grid.bounds[d][0] + grid.steps[d] / 2.0
                mj_up = metric_jets(grid.spec, wall_up, order=0)
                mj_dn = metric_jets(grid.spec, wall_dn, order=0)
                a_up_f = a_up_f.copy()
                a_dn_f = a_dn_f.copy()
                a_up_f[last] = mj_up.sqrt_det * mj_up.up[d, d]
                a_dn_f[first] = mj_dn.sqrt_det * mj_dn.up[d, d]
            else:  # natural: zero flux through the boundary faces
                keep_up_flux[last] = False
                keep_dn_flux[first] = False

        coef = inv_sq / (h * h)
        diag = np.zeros(M)
        diag[keep_up_flux] -= a_up_f[keep_up_flux]
        diag[keep_dn_flux] -= a_dn_f[keep_dn_flux]
        L[flat, flat] += coef * diag
        sel = use_up & keep_up_flux
        L[flat[sel], up_f[sel]] += coef[sel] * a_up_f[sel]
        sel = use_dn & keep_dn_flux
        L[flat[sel], dn_f[sel]] += coef[sel] * a_dn_f[sel]

    # mixed second derivatives via symmetrized wide central differences
    for di in range(n):
        for dj in range(di + 1, n):
            b = (node_mj.sqrt_det * node_mj.up[di, dj]).reshape(shape)
            if not np.any(np.abs(b) > 1e-15):
                continue
            hi, hj = grid.steps[di], grid.steps[dj]
            idx = np.arange(M).reshape(shape)
            coord = np.indices(shape)
            for si in (+1, -1):
                for sj in (+1, -1):
                    ti = coord[di] + si
                    tj = coord[dj] + sj
                    valid = np.ones(shape, dtype=bool)
                    if grid.boundary[di] == "periodic":
                        ti = ti % shape[di]
                    else:
                        valid &= (ti >= 0) & (ti < shape[di])
                        ti = np.clip(ti, 0, shape[di] - 1)
                    if grid.boundary[dj] == "periodic":
                        tj = tj % shape[dj]
                    else:
                        valid &= (tj >= 0) & (tj < shape[dj])
                        tj = np.clip(tj, 0, shape[dj] - 1)
                    # the ordered sum d_i(b d_j) + d_j(b d_i): one b sampled a
                    # step along each direction (rows crossing non-periodic
                    # edges are already excluded by `valid`)
                    bi = np.roll(b, -si, axis=di)
                    bj = np.roll(b, -sj, axis=dj)
                    multi = [coord[k] for k in range(n)]
                    multi[di] = ti
                    multi[dj] = tj
                    nbr_flat = np.ravel_multi_index(multi, shape)
                    amp = si * sj * (bi + bj) / (4.0 * hi * hj)
                    rows = idx[valid].ravel()
                    colsn = nbr_flat[valid].ravel()
                    vals = (amp[valid] * inv_sq.reshape(shape)[valid]).ravel()
                    np.add.at(L, (rows, colsn), vals)
    return L


def hamiltonian_matrix(spec: MetricSpec, rule, grid: Grid, hbar: float = 1.0,
                       mass: float = 1.0, extra_potential=None) -> GridOperator:
    """Assemble H = -(hbar^2/2m) Lap + diag(V_q(rule)) [+ extra diagonal].

    ``rule`` may be None to omit the quantum potential.  ``extra_potential``
    is a callable mapping an (n, M) node batch to diagonal values, or an
    array of length M; it is added verbatim (used for curvature shifts and
    external potentials).
    """
    if grid.spec is not spec and grid.spec != spec:
        raise GridError("grid was built for a different metric")
    L = kinetic_matrix(grid)
    H = -(hbar * hbar) / (2.0 * mass) * L
    label = "kinetic"
    if rule is not None:
        rule = parse_rule(rule)
        vq = quantum_potential_batch(spec, rule, grid.nodes, hbar, mass)
        H[np.diag_indices_from(H)] += vq
        label = f"H[{rule.label or 'custom'}]"
    if extra_potential is not None:
        extra = (
            extra_potential(grid.nodes)
            if callable(extra_potential)
            else np.asarray(extra_potential, dtype=float)
        )
        H[np.diag_indices_from(H)] += extra
        label += "+V"
    return GridOperator(matrix=H, grid=grid, label=label)


def eigen_spectrum(op: GridOperator, k: int, hermiticity_tol: float = 1e-9) -> np.ndarray:
    """k smallest eigenvalues of the weighted-inner-product eigenproblem.

    The operator is symmetrized by the diagonal similarity transform
    S = W^{1/2} M W^{-1/2}; a Hermiticity defect beyond ``hermiticity_tol``
    (relative to the matrix scale) raises.
    """
    M = op.matrix
    w = np.sqrt(op.grid.weights)
    S = (w[:, None] * M) / w[None, :]
    scale = max(float(np.abs(S).max()), 1.0)
    defect = float(np.abs(S - S.conj().T).max())
    if defect > hermiticity_tol * scale:
        raise ValueError(f"operator is not Hermitian (defect {defect:.3g})")
    S = 0.5 * (S + S.conj().T)
    if np.iscomplexobj(S) and np.abs(S.imag).max() < 1e-14 * scale:
        S = S.real
    dim = S.shape[0]
    if k >= dim:
        raise ValueError(f"requested {k} eigenvalues of a {dim}-dim operator")
    if dim <= 2048:
        vals = scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[0, k - 1])
    else:
        # shift-invert Lanczos around a Gershgorin lower bound; a dense LU
        # factorization makes the inner solves cheap and the low clustered
        # (degenerate) eigenvalues converge in a handful of iterations
        import scipy.sparse.linalg as spla

        diag = np.real(np.diag(S))
        off = np.sum(np.abs(S), axis=1) - np.abs(diag)
        sigma = float(np.min(diag - off)) - 1e-3 * scale - 1e-9
        lu, piv = scipy.linalg.lu_factor(S - sigma * np.eye(dim, dtype=S.dtype))
        op_inv = spla.LinearOperator(
            S.shape, matvec=lambda x: scipy.linalg.lu_solve((lu, piv), x), dtype=S.dtype
        )
        vals = spla.eigsh(
            S, k=k, sigma=sigma, OPinv=op_inv, which="LM", return_eigenvectors=False
        )
        vals = np.sort(vals)
    return np.asarray(vals[:k], dtype=float)


def evolve(op: GridOperator, psi0, t: float, steps: int, hbar: float = 1.0) -> np.ndarray:
    """Unitary implicit-midpoint (Crank-Nicolson) evolution of i hbar dpsi/dt = H psi."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    psi = np.asarray(psi0, dtype=complex).copy()
    if t == 0.0:
        return psi
    dt = t / steps
    M = op.matrix
    ident = np.eye(M.shape[0], dtype=complex)
    A = ident + 0.5j * dt / hbar * M
    B = ident - 0.5j * dt / hbar * M
    lu, piv = scipy.linalg.lu_factor(A)
    for _ in range(steps):
        psi = scipy.linalg.lu_solve((lu, piv), B @ psi)
    return psi
