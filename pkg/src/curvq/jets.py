"""Truncated Taylor (jet) arithmetic through third order.

A :class:`Jet` carries the value of a scalar field together with its exact
partial derivatives up to a requested order (0..3) at a batch of points.
Derivatives are propagated through expression trees by forward-mode rules,
so results are exact to rounding, with no finite differencing and no
symbolic expression swell.

All component arrays share a trailing batch shape; derivative axes come
first (``grad[i]``, ``hess[i, j]``, ``third[i, j, k]``).  Hessians and
third-derivative tensors are stored fully, but only canonical index
combinations (sorted indices) are computed; the remaining entries are
mirrored so that symmetry holds bit-for-bit.
"""

from __future__ import annotations

import itertools

import numpy as np

from .expressions import BinOp, Const, Expr, Func, Neg, Pow, Var, expr_to_string

__all__ = ["Jet", "EvaluationError", "eval_jet", "eval_value"]


class EvaluationError(ArithmeticError):
    """Domain error while evaluating an expression (log, division, ...)."""

    def __init__(self, message: str, node: Expr | None = None):
        if node is not None:
            message = f"{message} in subexpression {expr_to_string(node)!r}"
        super().__init__(message)
        self.node = node


def _mirror_sym(arr: np.ndarray, rank: int, n: int) -> np.ndarray:
    """Copy canonical (sorted-index) entries onto all permutations."""
    if rank == 2:
        for i in range(n):
            for j in range(i + 1, n):
                arr[j, i] = arr[i, j]
    elif rank == 3:
        for idx in itertools.combinations_with_replacement(range(n), 3):
            canonical = arr[idx]
            for perm in set(itertools.permutations(idx)):
                if perm != idx:
                    arr[perm] = canonical
    return arr


class Jet:
    """Value plus exact partial derivatives through ``order`` at points."""

    __slots__ = ("n", "order", "value", "grad", "hess", "third")

    def __init__(self, n, order, value, grad=None, hess=None, third=None):
        self.n = n
        self.order = order
        self.value = np.asarray(value, dtype=float)
        shape = self.value.shape
        if order >= 1:
            self.grad = np.zeros((n,) + shape) if grad is None else grad
        else:
            self.grad = None
        if order >= 2:
            self.hess = np.zeros((n, n) + shape) if hess is None else hess
        else:
            self.hess = None
        if order >= 3:
            self.third = np.zeros((n, n, n) + shape) if third is None else third
        else:
            self.third = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c, n, order, shape=()):
        return cls(n, order, np.broadcast_to(np.asarray(c, dtype=float), shape).copy())

    @classmethod
    def variable(cls, index, values, n, order):
        """Jet of the coordinate function x_index (1-based)."""
        values = np.asarray(values, dtype=float)
        jet = cls(n, order, values.copy())
        if order >= 1:
            jet.grad[index - 1] = 1.0
        return jet

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        out = Jet(self.n, self.order, self.value + other.value)
        if self.order >= 1:
            out.grad = self.grad + other.grad
        if self.order >= 2:
            out.hess = self.hess + other.hess
        if self.order >= 3:
            out.third = self.third + other.third
        return out

    def __neg__(self):
        out = Jet(self.n, self.order, -self.value)
        if self.order >= 1:
            out.grad = -self.grad
        if self.order >= 2:
            out.hess = -self.hess
        if self.order >= 3:
            out.third = -self.third
        return out

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        other = self._coerce(other)
        u, v = self, other
        n, order = self.n, self.order
        out = Jet(n, order, u.value * v.value)
        if order >= 1:
            out.grad = u.grad * v.value + u.value * v.grad
        if order >= 2:
            h = np.empty_like(out.hess)
            for i in range(n):
                for j in range(i, n):
                    h[i, j] = (
                        u.hess[i, j] * v.value
                        + u.grad[i] * v.grad[j]
                        + u.grad[j] * v.grad[i]
                        + u.value * v.hess[i, j]
                    )
            out.hess = _mirror_sym(h, 2, n)
        if order >= 3:
            t = np.empty_like(out.third)
            for idx in itertools.combinations_with_replacement(range(n), 3):
                i, j, k = idx
                t[idx] = (
                    u.third[i, j, k] * v.value
                    + u.hess[i, j] * v.grad[k]
                    + u.hess[i, k] * v.grad[j]
                    + u.hess[j, k] * v.grad[i]
                    + u.grad[i] * v.hess[j, k]
                    + u.grad[j] * v.hess[i, k]
                    + u.grad[k] * v.hess[i, j]
                    + u.value * v.third[i, j, k]
                )
            out.third = _mirror_sym(t, 3, n)
        return out

    def __truediv__(self, other):
        other = self._coerce(other)
        if np.any(other.value == 0.0):
            raise EvaluationError("division by zero")
        return self * other._compose(
            1.0 / other.value,
            -1.0 / other.value**2,
            2.0 / other.value**3,
            -6.0 / other.value**4,
        )

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.n, self.order, self.value.shape)

    # -- composition with a scalar function ---------------------------------

    def _compose(self, f0, f1, f2=None, f3=None):
        """Jet of f(u) given derivatives of f at u.value (Faa di Bruno)."""
        n, order = self.n, self.order
        out = Jet(n, order, np.asarray(f0, dtype=float))
        if order >= 1:
            out.grad = f1 * self.grad
        if order >= 2:
            h = np.empty_like(out.hess)
            for i in range(n):
                for j in range(i, n):
                    h[i, j] = f1 * self.hess[i, j] + f2 * self.grad[i] * self.grad[j]
            out.hess = _mirror_sym(h, 2, n)
        if order >= 3:
            t = np.empty_like(out.third)
            for idx in itertools.combinations_with_replacement(range(n), 3):
                i, j, k = idx
                t[idx] = (
                    f1 * self.third[i, j, k]
                    + f2
                    * (
                        self.grad[i] * self.hess[j, k]
                        + self.grad[j] * self.hess[i, k]
                        + self.grad[k] * self.hess[i, j]
                    )
                    + f3 * self.grad[i] * self.grad[j] * self.grad[k]
                )
            out.third = _mirror_sym(t, 3, n)
        return out

    def int_pow(self, p: int):
        if p == 0:
            return Jet.constant(1.0, self.n, self.order, self.value.shape)
        if p < 0:
            return Jet.constant(1.0, self.n, self.order, self.value.shape) / self.int_pow(-p)
        result = None
        base = self
        while p:
            if p & 1:
                result = base if result is None else result * base
            p >>= 1
            if p:
                base = base * base
        return result

    def real_pow(self, c: float):
        if np.any(self.value <= 0.0):
            raise EvaluationError(f"x^{c} requires a positive base for non-integer exponent")
        u = self.value
        return self._compose(
            u**c,
            c * u ** (c - 1),
            c * (c - 1) * u ** (c - 2),
            c * (c - 1) * (c - 2) * u ** (c - 3),
        )


_UNARY_TABLE = {
    "sin": lambda u: (np.sin(u), np.cos(u), -np.sin(u), -np.cos(u)),
    "cos": lambda u: (np.cos(u), -np.sin(u), -np.cos(u), np.sin(u)),
    "exp": lambda u: (np.exp(u),) * 4,
    "sinh": lambda u: (np.sinh(u), np.cosh(u), np.sinh(u), np.cosh(u)),
    "cosh": lambda u: (np.cosh(u), np.sinh(u), np.cosh(u), np.sinh(u)),
}


def _unary_derivs(name: str, u: np.ndarray, node: Expr):
    if name in _UNARY_TABLE:
        return _UNARY_TABLE[name](u)
    if name == "tan":
        t = np.tan(u)
        d1 = 1.0 + t * t
        return (t, d1, 2.0 * t * d1, d1 * (2.0 + 6.0 * t * t))
    if name == "tanh":
        t = np.tanh(u)
        d1 = 1.0 - t * t
        return (t, d1, -2.0 * t * d1, d1 * (6.0 * t * t - 2.0))
    if name == "log":
        if np.any(u <= 0.0):
            raise EvaluationError("log of non-positive value", node)
        return (np.log(u), 1.0 / u, -1.0 / u**2, 2.0 / u**3)
    if name == "sqrt":
        if np.any(u < 0.0):
            raise EvaluationError("sqrt of negative value", node)
        if np.any(u == 0.0):
            raise EvaluationError("sqrt derivative singular at zero", node)
        r = np.sqrt(u)
        return (r, 0.5 / r, -0.25 / (u * r), 0.375 / (u * u * r))
    raise EvaluationError(f"unknown function {name}", node)


def _eval(node: Expr, coords: np.ndarray, n: int, order: int) -> Jet:
    if isinstance(node, Const):
        return Jet.constant(node.value, n, order, coords.shape[1:])
    if isinstance(node, Var):
        return Jet.variable(node.index, coords[node.index - 1], n, order)
    if isinstance(node, Neg):
        return -_eval(node.arg, coords, n, order)
    if isinstance(node, BinOp):
        left = _eval(node.left, coords, n, order)
        right = _eval(node.right, coords, n, order)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        try:
            return left / right
        except EvaluationError:
            raise EvaluationError("division by zero", node) from None
    if isinstance(node, Pow):
        base = _eval(node.base, coords, n, order)
        expo = node.exponent
        if float(expo).is_integer():
            return base.int_pow(int(expo))
        try:
            return base.real_pow(expo)
        except EvaluationError:
            raise EvaluationError(
                f"x^{expo} requires a positive base", node
            ) from None
    if isinstance(node, Func):
        arg = _eval(node.arg, coords, n, order)
        f0, f1, f2, f3 = _unary_derivs(node.name, arg.value, node)
        return arg._compose(f0, f1, f2, f3)
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet(ast: Expr, point, n: int, order: int = 0) -> Jet:
    """Evaluate ``ast`` with exact derivatives through ``order`` (0..3).

    Parameters
    ----------
    ast : Expr
        Parsed expression over coordinates x1..xn.
    point : array_like
        Either a single point of length n or an (n, ...) batch of points.
    n : int
        Dimension of the coordinate space.
    order : int
        Highest derivative order to carry (0 to 3).

    Returns
    -------
    Jet
        Component arrays share the batch shape of ``point`` beyond its
        leading coordinate axis.
    """
    if not 0 <= order <= 3:
        raise ValueError("order must be between 0 and 3")
    coords = np.asarray(point, dtype=float)
    if coords.ndim == 1 and coords.shape[0] != n:
        raise ValueError(f"point has length {coords.shape[0]}, expected {n}")
    if coords.ndim == 0:
        if n != 1:
            raise ValueError("scalar point only valid for n=1")
        coords = coords.reshape(1)
    return _eval(ast, coords, n, order)


def eval_value(ast: Expr, point, n: int) -> np.ndarray:
    """Plain values of ``ast`` on a batch of points (order-0 jet)."""
    return eval_jet(ast, point, n, order=0).value
