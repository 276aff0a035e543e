"""Forward-mode second-order differentiation over a handful of real inputs.

A :class:`DiffScalar` carries a value together with its full gradient and
Hessian with respect to ``n`` seeded variables.  Values may be numpy arrays:
every payload has the variable axes first and the value shape trailing, so a
whole batch of independent evaluation points is propagated in one pass.

Nesting (differentiating through a gradient) is supported by
:func:`gradient` when it is called at points that are themselves
``DiffScalar`` objects: the inner derivatives are lifted to the outer
variables by the chain rule.  Lifted results are exact to first order in the
outer variables and carry no Hessian (``hess is None``).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

MAX_VARIABLES = 16


class DiffScalar:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = None if hess is None else np.asarray(hess, dtype=float)

    @classmethod
    def constant(cls, value, n: int, order: int = 2) -> "DiffScalar":
        value = np.asarray(value, dtype=float)
        grad = np.zeros((n,) + value.shape)
        hess = np.zeros((n, n) + value.shape) if order >= 2 else None
        return cls(value, grad, hess)

    @property
    def n(self) -> int:
        return self.grad.shape[0]

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    def __repr__(self) -> str:
        return f"DiffScalar(value={self.value!r}, n={self.n}, order={self.order})"

    # -- helpers -----------------------------------------------------------

    def _check(self, other: "DiffScalar") -> None:
        if other.n != self.n:
            raise ValueError(
                f"cannot combine DiffScalars over {self.n} and {other.n} variables"
            )

    def _lift(self, other) -> "DiffScalar":
        # A plain operand with more value axes than self would misalign the
        # variable axes under broadcasting, so promote it to a constant.
        return DiffScalar.constant(other, self.n, self.order)

    def _unary(self, f0, f1, f2) -> "DiffScalar":
        # f0, f1, f2: value, first and second derivative of the outer function
        grad = f1 * self.grad
        hess = None
        if self.hess is not None:
            hess = f1 * self.hess + f2 * _outer(self.grad, self.grad)
        return DiffScalar(f0, grad, hess)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, DiffScalar) and np.ndim(other) > self.value.ndim:
            other = self._lift(other)
        if isinstance(other, DiffScalar):
            self._check(other)
            return DiffScalar(
                self.value + other.value,
                self.grad + other.grad,
                _add_hess(self.hess, other.hess),
            )
        return DiffScalar(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return DiffScalar(-self.value, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        if not isinstance(other, DiffScalar) and np.ndim(other) > self.value.ndim:
            other = self._lift(other)
        if isinstance(other, DiffScalar):
            self._check(other)
            return DiffScalar(
                self.value - other.value,
                self.grad - other.grad,
                _add_hess(self.hess, None if other.hess is None else -other.hess),
            )
        return DiffScalar(self.value - other, self.grad, self.hess)

    def __rsub__(self, other):
        if np.ndim(other) > self.value.ndim:
            return self._lift(other) - self
        return DiffScalar(other - self.value, -self.grad, None if self.hess is None else -self.hess)

    def __mul__(self, other):
        if not isinstance(other, DiffScalar) and np.ndim(other) > self.value.ndim:
            other = self._lift(other)
        if isinstance(other, DiffScalar):
            self._check(other)
            a, b = self.value, other.value
            grad = a * other.grad + b * self.grad
            hess = None
            if self.hess is not None and other.hess is not None:
                cross = _outer(self.grad, other.grad)
                hess = a * other.hess + b * self.hess + (cross + np.swapaxes(cross, 0, 1))
            return DiffScalar(a * b, grad, hess)
        other = np.asarray(other, dtype=float)
        return DiffScalar(
            self.value * other, self.grad * other, None if self.hess is None else self.hess * other
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "DiffScalar":
        x = self.value
        if np.any(x == 0):
            raise ZeroDivisionError("DiffScalar division by zero")
        inv = 1.0 / x
        return self._unary(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, DiffScalar):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        if np.any(other == 0):
            raise ZeroDivisionError("DiffScalar division by zero")
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, power):
        if isinstance(power, DiffScalar):
            raise TypeError("only constant exponents are supported")
        p = float(power)
        x = self.value
        if p == 0:
            return DiffScalar.constant(np.ones_like(x), self.n, self.order)
        return self._unary(x**p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2) if p != 1 else 0.0)

    def exp(self) -> "DiffScalar":
        e = np.exp(self.value)
        return self._unary(e, e, e)

    def log(self) -> "DiffScalar":
        x = self.value
        if np.any(x <= 0):
            raise ValueError("log of non-positive DiffScalar")
        return self._unary(np.log(x), 1.0 / x, -1.0 / (x * x))

    def sigmoid(self) -> "DiffScalar":
        s = _sigmoid(self.value)
        d1 = s * (1.0 - s)
        return self._unary(s, d1, d1 * (1.0 - 2.0 * s))

    def minimum(self, bound) -> "DiffScalar":
        # Clamped branch is constant, so its derivatives vanish; ties pass through.
        clamped = self.value > bound
        keep = np.where(clamped, 0.0, 1.0)
        value = np.where(clamped, bound, self.value)
        return DiffScalar(
            value, self.grad * keep, None if self.hess is None else self.hess * keep
        )


def _outer(g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    return g1[:, None] * g2[None, :]


def _add_hess(h1, h2):
    if h1 is None or h2 is None:
        return None
    return h1 + h2


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    # Branch on sign so neither exp() overflows.
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


# -- generic scalar functions (work on floats, arrays and DiffScalars) -------


def exp(x):
    return x.exp() if isinstance(x, DiffScalar) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, DiffScalar) else np.log(x)


def sigmoid(x):
    return x.sigmoid() if isinstance(x, DiffScalar) else _sigmoid(x)


def minimum(x, bound: float):
    """``min(x, bound)`` with zero derivative on the clamped branch."""
    return x.minimum(bound) if isinstance(x, DiffScalar) else np.minimum(x, bound)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, DiffScalar) else np.asarray(x, dtype=float)


# -- seeding and derivative extraction ---------------------------------------


def seed_variables(values: Sequence, order: int = 2) -> list[DiffScalar]:
    """Independent variables: unit gradient along their own axis, zero Hessian."""
    values = [np.asarray(v, dtype=float) for v in values]
    n = len(values)
    if n == 0:
        raise ValueError("need at least one variable")
    if n > MAX_VARIABLES:
        raise ValueError(f"at most {MAX_VARIABLES} variables are supported, got {n}")
    shape = np.broadcast_shapes(*(v.shape for v in values))
    out = []
    for i, v in enumerate(values):
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite seed value for variable {i}")
        grad = np.zeros((n,) + shape)
        grad[i] = 1.0
        hess = np.zeros((n, n) + shape) if order >= 2 else None
        out.append(DiffScalar(np.broadcast_to(v, shape), grad, hess))
    return out


def _as_result(y, n: int, order: int) -> DiffScalar:
    if isinstance(y, DiffScalar):
        return y
    # f ignored its inputs
    return DiffScalar.constant(y, n, order)


def gradient(f: Callable[..., object], at: Sequence):
    """Gradient of the scalar function ``f(*at)``.

    With plain numbers (or arrays) in ``at`` this returns an array of shape
    ``(n,) + value_shape``.  If any entry of ``at`` is a ``DiffScalar`` the call
    is nested inside an outer differentiation: the result is a list of
    first-order ``DiffScalar`` partials whose own gradients are taken with
    respect to the outer variables.
    """
    outer = [x for x in at if isinstance(x, DiffScalar)]
    if not outer:
        xs = seed_variables(at, order=1)
        return _as_result(f(*xs), len(xs), 1).grad

    m = outer[0].n
    for x in outer:
        if x.n != m:
            raise ValueError("outer DiffScalars disagree on variable count")
    xs = seed_variables([value_of(x) for x in at], order=2)
    y = _as_result(f(*xs), len(xs), 2)
    value_shape = y.value.shape
    # d(outer input j)/d(outer variables), zero for inputs that are constants
    dx = np.stack(
        [
            np.broadcast_to(x.grad, (m,) + value_shape)
            if isinstance(x, DiffScalar)
            else np.zeros((m,) + value_shape)
            for x in at
        ]
    )
    return [
        DiffScalar(y.grad[i], np.einsum("j...,jk...->k...", y.hess[i], dx))
        for i in range(len(at))
    ]


def hessian(f: Callable[..., object], at: Sequence) -> np.ndarray:
    xs = seed_variables(at, order=2)
    return _as_result(f(*xs), len(xs), 2).hess


def derivatives(f: Callable[..., object], at: Sequence) -> DiffScalar:
    """Value, gradient and Hessian of ``f`` at ``at`` in one pass."""
    xs = seed_variables(at, order=2)
    return _as_result(f(*xs), len(xs), 2)
