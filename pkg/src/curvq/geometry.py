"""Pointwise differential geometry derived from a metric expression.

Everything is computed from exact jets of the metric components; no finite
differencing enters Christoffel symbols or curvature.  The curvature sign
convention is fixed so that the unit 2-sphere has scalar curvature +2
(Ricci is the contraction of the Riemann tensor on its first and third
slots).

Array layout: derivative/tensor indices lead, an arbitrary batch shape
trails.  A batch of B points is passed as an (n, B) array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import EvaluationError, eval_jet
from .metrics import MetricSpec

__all__ = [
    "MetricValue",
    "ChristoffelData",
    "CurvatureData",
    "MetricEvaluationError",
    "MetricJets",
    "metric_jets",
    "metric_at",
    "christoffel",
    "curvature",
    "laplace_beltrami_apply",
]


class MetricEvaluationError(ArithmeticError):
    """Metric evaluation failed (not positive definite, domain error, ...)."""


@dataclass(frozen=True)
class MetricValue:
    lower: np.ndarray      # omega_ij
    upper: np.ndarray      # omega^ij
    det: float
    sqrt_det: float


@dataclass(frozen=True)
class ChristoffelData:
    gamma: np.ndarray       # gamma[k][i][j], upper index first
    contracted: np.ndarray  # gamma_i = gamma^k_{ki}


@dataclass(frozen=True)
class CurvatureData:
    riemann: np.ndarray  # R^a_{bcd}
    ricci: np.ndarray    # R_{bd} = R^a_{bad}
    scalar: float


def _as_batch(point, n: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(point, dtype=float)
    if pts.ndim == 1:
        if pts.shape[0] != n:
            raise ValueError(f"point has length {pts.shape[0]}, expected {n}")
        return pts.reshape(n, 1), True
    if pts.shape[0] != n:
        raise ValueError(f"batch leading axis {pts.shape[0]} != dimension {n}")
    return pts, False


class MetricJets:
    """Batched metric data: values, derivatives, inverse, Christoffels.

    Built once per point batch; all members are plain arrays with the batch
    shape trailing.  ``order`` controls how many metric derivatives are
    available (0, 1 or 2).
    """

    def __init__(self, spec: MetricSpec, pts: np.ndarray, order: int):
        if order > 2:
            raise ValueError("MetricJets supports metric derivatives up to order 2")
        self.spec = spec
        self.order = order
        n = spec.n
        batch = pts.shape[1:]
        low = np.zeros((n, n) + batch)
        low_d1 = np.zeros((n, n, n) + batch) if order >= 1 else None
        low_d2 = np.zeros((n, n, n, n) + batch) if order >= 2 else None
        try:
            for i, j, expr in spec.component_entries():
                jet = eval_jet(expr, pts, n, order)
                low[i - 1, j - 1] = jet.value
                if i != j:
                    low[j - 1, i - 1] = jet.value
                if order >= 1:
                    low_d1[:, i - 1, j - 1] = jet.grad
                    if i != j:
                        low_d1[:, j - 1, i - 1] = jet.grad
                if order >= 2:
                    low_d2[:, :, i - 1, j - 1] = jet.hess
                    if i != j:
                        low_d2[:, :, j - 1, i - 1] = jet.hess
        except EvaluationError as err:
            raise MetricEvaluationError(f"metric component evaluation failed: {err}") from err

        # SPD check via eigvalsh (batch-first layout for numpy.linalg)
        mats = np.moveaxis(low, (0, 1), (-2, -1))
        eigs = np.linalg.eigvalsh(mats)
        min_eig = eigs[..., 0]
        if np.any(min_eig <= 0.0):
            worst = float(np.min(min_eig))
            raise MetricEvaluationError(
                f"metric not positive definite (min eigenvalue {worst:.6g})"
            )
        self.low = low
        self.det = np.prod(eigs, axis=-1)
        self.sqrt_det = np.sqrt(self.det)
        self.up = np.moveaxis(np.linalg.inv(mats), (-2, -1), (0, 1))
        self.low_d1 = low_d1
        self.low_d2 = low_d2

        if order >= 1:
            # d_k W^{ij} = -(W dw_k W)^{ij}
            self.up_d1 = -np.einsum("ia...,kab...,bj...->kij...", self.up, low_d1, self.up)
            self.lndet_d1 = np.einsum("ij...,kij...->k...", self.up, low_d1)
            # gamma^k_ij = 1/2 W^{kl} T_lij
            T = (
                np.einsum("ilj...->lij...", low_d1)
                + np.einsum("jli...->lij...", low_d1)
                - low_d1
            )
            self.gamma = 0.5 * np.einsum("kl...,lij...->kij...", self.up, T)
            self.contracted = 0.5 * self.lndet_d1
            self._T = T
        if order >= 2:
            W, Wd1 = self.up, self.up_d1
            self.up_d2 = (
                -np.einsum("kia...,lab...,bj...->klij...", Wd1, low_d1, W)
                - np.einsum("ia...,klab...,bj...->klij...", W, low_d2, W)
                - np.einsum("ia...,lab...,kbj...->klij...", W, low_d1, Wd1)
            )
            self.lndet_d2 = np.einsum("kij...,lij...->kl...", Wd1, low_d1) + np.einsum(
                "ij...,klij...->kl...", self.up, low_d2
            )
            Td1 = (
                np.einsum("milj...->mlij...", low_d2)
                + np.einsum("mjli...->mlij...", low_d2)
                - low_d2
            )
            self.gamma_d1 = 0.5 * (
                np.einsum("mkl...,lij...->mkij...", Wd1, self._T)
                + np.einsum("kl...,mlij...->mkij...", self.up, Td1)
            )

    def riemann(self) -> np.ndarray:
        """R^a_{bcd} with the sphere-positive sign convention."""
        G, Gd = self.gamma, self.gamma_d1
        return (
            np.einsum("cadb...->abcd...", Gd)
            - np.einsum("dacb...->abcd...", Gd)
            + np.einsum("ace...,edb...->abcd...", G, G)
            - np.einsum("ade...,ecb...->abcd...", G, G)
        )


def metric_jets(spec: MetricSpec, pts, order: int = 0) -> MetricJets:
    """Evaluate metric jets on an (n, B) batch of points."""
    pts = np.asarray(pts, dtype=float)
    return MetricJets(spec, pts, order)


def metric_at(spec: MetricSpec, point) -> MetricValue:
    """Metric tensor, inverse, determinant and its root at one point."""
    pts, _ = _as_batch(point, spec.n)
    mj = MetricJets(spec, pts, order=0)
    return MetricValue(
        lower=mj.low[..., 0],
        upper=mj.up[..., 0],
        det=float(mj.det[0]),
        sqrt_det=float(mj.sqrt_det[0]),
    )


def christoffel(spec: MetricSpec, point) -> ChristoffelData:
    """Christoffel symbols gamma^k_{ij} and the contraction gamma^k_{ki}."""
    pts, _ = _as_batch(point, spec.n)
    mj = MetricJets(spec, pts, order=1)
    return ChristoffelData(gamma=mj.gamma[..., 0], contracted=mj.contracted[..., 0])


def curvature(spec: MetricSpec, point) -> CurvatureData:
    """Riemann tensor, Ricci tensor and scalar curvature at one point."""
    pts, _ = _as_batch(point, spec.n)
    mj = MetricJets(spec, pts, order=2)
    riem = mj.riemann()
    ricci = np.einsum("abad...->bd...", riem)
    scalar = np.einsum("bd...,bd...->...", mj.up, ricci)
    return CurvatureData(
        riemann=riem[..., 0], ricci=ricci[..., 0], scalar=float(scalar[0])
    )


def laplace_beltrami_apply(spec: MetricSpec, f, point) -> float:
    """Apply the Laplace-Beltrami operator to a scalar field at a point.

    ``f`` is an expression tree; the operator is evaluated in divergence
    form, (1/sqrt w) d_i (sqrt w w^{ij} d_j f), entirely with jets.
    """
    pts, _ = _as_batch(point, spec.n)
    mj = MetricJets(spec, pts, order=1)
    jet = eval_jet(f, pts, spec.n, order=2)
    term2 = np.einsum("ij...,ij...->...", mj.up, jet.hess)
    div_up = np.einsum("iij...->j...", mj.up_d1)  # d_i W^{ij}
    term1 = np.einsum("j...,j...->...", div_up, jet.grad)
    term_gamma = np.einsum("i...,ij...,j...->...", mj.contracted, mj.up, jet.grad)
    return float((term2 + term1 + term_gamma)[0])
