"""Geodesics, normal coordinates, geodesic distance and the Van Vleck factor.

The geodesic equation is integrated with a batched adaptive Dormand-Prince
RK45 scheme; sensitivities of the endpoint with respect to the initial
velocity are carried as variational equations alongside the trajectory, so
chart Jacobians come out of the same solve that produced the geodesic.

A :class:`NormalChart` realizes geodesic normal coordinates around an
origin: ``forward`` is the exponential map of an orthonormalized frame,
``backward`` inverts it by Newton shooting on the forward map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import MetricJets, metric_at, metric_jets
from .metrics import MetricSpec

__all__ = [
    "GeodesicError",
    "ChartError",
    "exponential_map",
    "NormalChart",
    "normal_coordinates",
    "geodesic_distance",
    "van_vleck",
]


class GeodesicError(RuntimeError):
    """Adaptive step control failed or the geodesic left the chart."""


class ChartError(RuntimeError):
    """Normal-chart construction or inversion failed."""


# ---------------------------------------------------------------------------
# batched Dormand-Prince RK45

_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])


def _integrate(rhs, y0: np.ndarray, t1: float, rtol: float, atol: float,
               max_steps: int = 100_000) -> np.ndarray:
    """Integrate y' = rhs(y) from 0 to t1 for a (D, B) state batch.

    A single adaptive step size is shared across the batch; the step is
    accepted only when the worst per-column error estimate passes.
    """
    if t1 == 0.0:
        return y0.copy()
    y = y0.astype(float).copy()
    t = 0.0
    h = t1 / 16.0
    k = [None] * 7
    steps = 0
    while t < t1:
        h = min(h, t1 - t)
        k[0] = rhs(y)
        for s in range(1, 7):
            ys = y + h * sum(a * k[m] for m, a in enumerate(_DP_A[s]))
            k[s] = rhs(ys)
        y5 = y + h * sum(b * km for b, km in zip(_DP_B5, k))
        y4 = y + h * sum(b * km for b, km in zip(_DP_B4, k))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.max(np.abs(y5 - y4) / scale))
        if err <= 1.0:
            t += h
            y = y5
        steps += 1
        if steps > max_steps:
            raise GeodesicError("step control failed: too many steps")
        factor = 0.9 * (max(err, 1e-10)) ** (-0.2)
        h *= min(5.0, max(0.2, factor))
    return y


# ---------------------------------------------------------------------------
# geodesic right-hand sides

def _geodesic_rhs(spec: MetricSpec, state: np.ndarray) -> np.ndarray:
    """state rows: [x (n), v (n)]; geodesic equation in affine parameter."""
    n = spec.n
    x, v = state[:n], state[n:]
    mj = metric_jets(spec, x, order=1)
    acc = -np.einsum("kij...,i...,j...->k...", mj.gamma, v, v)
    return np.concatenate([v, acc], axis=0)


def _variational_rhs(spec: MetricSpec, state: np.ndarray, n: int, m: int) -> np.ndarray:
    """Augmented state [x, v, J (n*m), P (n*m)] with J = dx/dy0, P = dv/dy0."""
    B = state.shape[1]
    x = state[:n]
    v = state[n : 2 * n]
    J = state[2 * n : 2 * n + n * m].reshape(n, m, B)
    P = state[2 * n + n * m :].reshape(n, m, B)
    mj = metric_jets(spec, x, order=2)
    acc = -np.einsum("kij...,i...,j...->k...", mj.gamma, v, v)
    dP = -np.einsum("lkij...,i...,j...,la...->ka...", mj.gamma_d1, v, v, J) - 2.0 * np.einsum(
        "kij...,i...,ja...->ka...", mj.gamma, v, P
    )
    return np.concatenate([v, acc, P.reshape(n * m, B), dP.reshape(n * m, B)], axis=0)


def exponential_map(spec: MetricSpec, point, tangent, s: float,
                    rtol: float = 1e-11, atol: float = 1e-12,
                    return_velocity: bool = False):
    """Follow the geodesic from ``point`` with unit tangent ``tangent`` for
    arclength ``s`` and return the endpoint.

    The tangent must have unit length in the metric at ``point`` (checked to
    1e-8).  ``s`` may be zero, in which case the point is returned as is.
    With ``return_velocity`` the endpoint velocity is returned as well.
    """
    n = spec.n
    x0 = np.asarray(point, dtype=float).reshape(n)
    h = np.asarray(tangent, dtype=float).reshape(n)
    g = metric_at(spec, x0).lower
    norm = float(np.sqrt(h @ g @ h))
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"tangent is not unit length (|h|_w = {norm:.12g})")
    if s == 0.0:
        return (x0.copy(), h.copy()) if return_velocity else x0.copy()
    state0 = np.concatenate([x0, h * s]).reshape(2 * n, 1)
    out = _integrate(lambda y: _geodesic_rhs(spec, y), state0, 1.0, rtol, atol)
    if return_velocity:
        return out[:n, 0], out[n:, 0] / s
    return out[:n, 0]


# ---------------------------------------------------------------------------
# normal charts

def _gram_schmidt(g: np.ndarray) -> np.ndarray:
    """Orthonormalize the coordinate basis against metric g (columns e_a)."""
    n = g.shape[0]
    E = np.eye(n)
    for a in range(n):
        e = E[:, a].copy()
        for b in range(a):
            e -= (E[:, b] @ g @ e) * E[:, b]
        nrm = np.sqrt(e @ g @ e)
        if nrm <= 0:
            raise ChartError("degenerate metric while orthonormalizing frame")
        E[:, a] = e / nrm
    return E


@dataclass
class NormalChart:
    """Geodesic normal coordinates around ``origin``.

    ``frame[:, a]`` is the a-th orthonormal basis vector in chart
    coordinates.  ``forward`` maps normal coordinates y to chart points;
    ``backward`` inverts it by Newton shooting (tolerance ``newton_tol`` in
    chart coordinates).
    """

    spec: MetricSpec
    origin: np.ndarray
    frame: np.ndarray
    rtol: float = 1e-11
    atol: float = 1e-12
    newton_tol: float = 1e-10
    max_newton: int = 30

    def forward_batch(self, Y: np.ndarray) -> np.ndarray:
        """Exponential map for an (n, B) batch of normal coordinates."""
        n = self.spec.n
        Y = np.asarray(Y, dtype=float)
        B = Y.shape[1]
        V = self.frame @ Y
        state0 = np.concatenate([np.repeat(self.origin[:, None], B, axis=1), V], axis=0)
        out = _integrate(lambda y: _geodesic_rhs(self.spec, y), state0, 1.0,
                         self.rtol, self.atol)
        return out[:n]

    def forward_with_jacobian(self, Y: np.ndarray):
        """Endpoints and Jacobians d xi / d y for an (n, B) batch."""
        n = self.spec.n
        Y = np.asarray(Y, dtype=float)
        B = Y.shape[1]
        V = self.frame @ Y
        J0 = np.zeros((n, n, B))
        P0 = np.repeat(self.frame[:, :, None], B, axis=2)
        state0 = np.concatenate(
            [np.repeat(self.origin[:, None], B, axis=1), V,
             J0.reshape(n * n, B), P0.reshape(n * n, B)],
            axis=0,
        )
        out = _integrate(lambda y: _variational_rhs(self.spec, y, n, n), state0, 1.0,
                         self.rtol, self.atol)
        xi = out[:n]
        J = out[2 * n : 2 * n + n * n].reshape(n, n, B)
        return xi, J

    def forward(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(self.spec.n)
        if np.all(y == 0.0):
            return self.origin.copy()
        return self.forward_batch(y[:, None])[:, 0]

    def _wrap_residual(self, delta: np.ndarray) -> np.ndarray:
        for k, rng in enumerate(self.spec.ranges):
            if rng.periodic:
                L = rng.period
                delta[k] = (delta[k] + 0.5 * L) % L - 0.5 * L
        return delta

    def backward_batch(self, Xi: np.ndarray, seeds: np.ndarray | None = None) -> np.ndarray:
        """Invert the exponential map for an (n, B) batch of chart points."""
        n = self.spec.n
        Xi = np.asarray(Xi, dtype=float)
        B = Xi.shape[1]
        if seeds is None:
            delta = self._wrap_residual(Xi - self.origin[:, None])
            Y = np.linalg.solve(self.frame, delta)
        else:
            Y = seeds.astype(float).copy()
        for _ in range(self.max_newton):
            xi, J = self.forward_with_jacobian(Y)
            res = self._wrap_residual(xi - Xi)
            err = np.abs(res).max()
            if err < self.newton_tol:
                return Y
            # solve J dy = res per batch column
            Jb = np.moveaxis(J, -1, 0)
            try:
                dY = np.linalg.solve(Jb, np.moveaxis(res, -1, 0)[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise ChartError(f"normal-chart Newton produced a singular Jacobian: {exc}")
            Y = Y - np.moveaxis(dY, 0, -1)
        raise ChartError(
            f"normal-chart inversion did not converge (residual {err:.3g}); "
            "point may lie outside the injectivity neighborhood"
        )

    def backward(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).reshape(self.spec.n)
        return self.backward_batch(xi[:, None])[:, 0]

    def distance(self, xi) -> float:
        """Geodesic distance from the origin to ``xi``."""
        return float(np.linalg.norm(self.backward(xi)))


def normal_coordinates(spec: MetricSpec, origin, **kwargs) -> NormalChart:
    """Construct a normal chart at ``origin`` (Gram-Schmidt frame)."""
    x0 = np.asarray(origin, dtype=float).reshape(spec.n)
    g = metric_at(spec, x0).lower
    frame = _gram_schmidt(g)
    return NormalChart(spec=spec, origin=x0, frame=frame, **kwargs)


def geodesic_distance(spec: MetricSpec, p1, p2) -> float:
    """Geodesic distance via the normal-chart inverse at p1."""
    return normal_coordinates(spec, p1).distance(p2)


# ---------------------------------------------------------------------------
# Van Vleck determinant

def van_vleck(spec: MetricSpec, p1, p2, dt: float, mass: float = 1.0,
              return_check: bool = False):
    """Van Vleck determinant D = |det(-d^2 S / dxi' dxi)| for the short-time
    action S = m d(xi', xi)^2 / (2 dt).

    Mixed second derivatives are taken by central finite differences of the
    action with step 1e-4 * d (floored at 1e-6) and a half-step consistency
    evaluation; the Richardson combination of the two is returned.  With
    ``return_check=True`` the relative spread between the two step sizes is
    returned alongside.
    """
    n = spec.n
    p1 = np.asarray(p1, dtype=float).reshape(n)
    p2 = np.asarray(p2, dtype=float).reshape(n)
    if dt <= 0:
        raise ValueError("dt must be positive")
    # action values must be accurate well below h^2 or their integration
    # error differentiates into the Hessian; run the charts tight
    tight = dict(rtol=1e-13, atol=1e-14)
    d0 = normal_coordinates(spec, p1, **tight).distance(p2)
    step = max(1e-4 * d0, 1e-6)

    def hessian(h):
        # one chart per shifted first endpoint, batched over second endpoints
        shifted2 = np.stack([p2 + h * _e(n, j) for j in range(n)]
                            + [p2 - h * _e(n, j) for j in range(n)], axis=1)
        S = np.zeros((2 * n, 2 * n))  # rows: p1 shifts (+0..n-1, -0..n-1)
        for si, sgn in ((0, 1.0), (n, -1.0)):
            for i in range(n):
                chart = normal_coordinates(spec, p1 + sgn * h * _e(n, i), **tight)
                Y = chart.backward_batch(shifted2)
                S[si + i] = mass * np.sum(Y * Y, axis=0) / (2.0 * dt)
        H = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                H[i, j] = (S[i, j] - S[i, n + j] - S[n + i, j] + S[n + i, n + j]) / (
                    4.0 * h * h
                )
        return H

    H1 = hessian(step)
    H2 = hessian(step / 2.0)
    H = (4.0 * H2 - H1) / 3.0
    D = abs(float(np.linalg.det(-H)))
    if return_check:
        D1 = abs(float(np.linalg.det(-H1)))
        D2 = abs(float(np.linalg.det(-H2)))
        spread = abs(D1 - D2) / max(abs(D2), 1e-300)
        return D, spread
    return D


def _e(n: int, i: int) -> np.ndarray:
    v = np.zeros(n)
    v[i] = 1.0
    return v


def geodesic_fan(spec: MetricSpec, origin, frame: np.ndarray, directions: np.ndarray,
                 s_grid: np.ndarray):
    """Shoot a fan of unit-speed geodesics and checkpoint along arclength.

    ``directions`` is an (n, D) array of unit vectors in the orthonormal
    frame; ``s_grid`` an increasing array of arclengths starting above 0.
    Returns chart points ``xi`` of shape (n, S, D) and the determinant of
    the initial-velocity sensitivity ``det_a`` of shape (S, D), from which
    the exponential-map Jacobian at y = s*u is det_a / s^n.

    Integration is fixed-step classical RK4 with one step per checkpoint
    interval; the s-grids used for oscillatory quadrature are much finer
    than the integration accuracy requires.
    """
    n = spec.n
    x0 = np.asarray(origin, dtype=float).reshape(n)
    U = frame @ directions  # chart-coordinate unit velocities
    D = U.shape[1]
    A0 = np.zeros((n, n, D))
    B0 = np.repeat(frame[:, :, None], D, axis=2)
    state = np.concatenate(
        [np.repeat(x0[:, None], D, axis=1), U,
         A0.reshape(n * n, D), B0.reshape(n * n, D)],
        axis=0,
    )

    def rhs(y):
        return _variational_rhs(spec, y, n, n)

    S = len(s_grid)
    xi = np.zeros((n, S, D))
    det_a = np.zeros((S, D))
    s_prev = 0.0
    for i, s in enumerate(s_grid):
        h = s - s_prev
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s_prev = s
        xi[:, i, :] = state[:n]
        A = state[2 * n : 2 * n + n * n].reshape(n, n, D)
        mats = np.moveaxis(A, (0, 1), (-2, -1))
        det_a[i] = np.abs(np.linalg.det(mats))
    return xi, det_a


def van_vleck_from_jacobian(spec: MetricSpec, chart: NormalChart, y: np.ndarray,
                            J: np.ndarray, xi2: np.ndarray, dt: float,
                            mass: float = 1.0) -> float:
    """Van Vleck determinant from the exponential-map Jacobian.

    Identical quantity to :func:`van_vleck` (cross-checked in tests), but
    computed from the variational solve: D = (m/dt)^n sqrt(w(p1)) / |det J|
    where J is the Jacobian of the forward map at y.
    """
    n = spec.n
    w1 = metric_at(spec, chart.origin).sqrt_det
    detJ = abs(float(np.linalg.det(J)))
    if detJ == 0.0:
        raise ChartError("vanishing exponential-map Jacobian (conjugate point)")
    return (mass / dt) ** n * w1 / detJ
