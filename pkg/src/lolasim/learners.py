"""Naive, look-ahead, LOLA and SOS gradients, and the simultaneous update step.

All operators are written from the point of view of a "self" player facing
an "opp" player.  A *payoff function* ``pay(theta_self, theta_opp)`` returns
``(V_self, V_opp)``; :func:`perspective` builds one for either seat of a game.

Parameter vectors are sequences (or arrays of shape ``(n, *batch)``); every
returned gradient has shape ``(n_self, *batch)``.  All learners ascend their
own payoff: ``theta <- theta + delta * xi``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from lolasim import diffnum as dn


class Kind(str, enum.Enum):
    NAIVE = "naive"
    LOOKAHEAD = "la"
    LOLA = "lola"
    LOLA_FIRST_ORDER = "lola1"
    SOS = "sos"


@dataclass(frozen=True)
class LearnerSpec:
    kind: Kind = Kind.NAIVE
    delta: float = 1.0
    eta: float = 1.0
    a: float = 0.5
    b: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.delta >= 0:
            raise ValueError("learning rate delta must be non-negative")
        if not self.eta >= 0:
            raise ValueError("opponent learning rate eta must be non-negative")
        if not (0 < self.a < 1 and 0 < self.b < 1):
            raise ValueError("SOS hyperparameters a, b must lie in (0, 1)")

    @property
    def needs_second_order(self) -> bool:
        return self.kind is not Kind.NAIVE


@dataclass
class GradientReport:
    naive: np.ndarray
    look_ahead: np.ndarray
    shaping: np.ndarray  # first-order shaping term (chi)
    final: np.ndarray
    p: np.ndarray = field(default_factory=lambda: np.float64(1.0))


PayoffFn = Callable[[list, list], tuple]


def perspective(game, seat: int) -> PayoffFn:
    if seat == 0:
        return game.payoffs

    def pay(theta_self, theta_opp):
        v_a, v_b = game.payoffs(theta_opp, theta_self)
        return v_b, v_a

    return pay


def _rows(theta) -> list:
    return [np.asarray(t, dtype=float) for t in theta]


def _contract(vec: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """``sum_b vec[b] * mat[b, a]`` in a fixed order.

    einsum may pick a layout-dependent summation order, which would break
    bitwise agreement between the two seats.
    """
    out = vec[0] * mat[0]
    for b in range(1, len(vec)):
        out = out + vec[b] * mat[b]
    return out


class LocalDerivatives:
    """Second-order jets of ``V_self`` and ``V_opp`` over ``[theta_self, theta_opp]``."""

    def __init__(self, pay: PayoffFn, theta_self, theta_opp, v_self=None, v_opp=None):
        self.pay = pay
        self.theta_self = _rows(theta_self)
        self.theta_opp = _rows(theta_opp)
        self.n_self = len(self.theta_self)
        if v_self is None:
            xs = dn.seed_variables(self.theta_self + self.theta_opp, order=2)
            v_self, v_opp = pay(xs[: self.n_self], xs[self.n_self:])
        self.v_self = v_self
        self.v_opp = v_opp

    def swapped(self, pay_other: PayoffFn) -> "LocalDerivatives":
        """Same jets seen from the opponent's seat (a pure permutation)."""
        ns, no = self.n_self, len(self.theta_opp)
        perm = list(range(ns, ns + no)) + list(range(ns))

        def permute(v):
            return dn.DiffScalar(v.value, v.grad[perm], v.hess[perm][:, perm])

        return LocalDerivatives(
            pay_other, self.theta_opp, self.theta_self, permute(self.v_opp), permute(self.v_self)
        )

    # gradient blocks
    @property
    def naive(self) -> np.ndarray:
        return self.v_self.grad[: self.n_self]

    @property
    def opp_grad_of_self(self) -> np.ndarray:  # d V_self / d theta_opp
        return self.v_self.grad[self.n_self:]

    @property
    def opp_naive(self) -> np.ndarray:  # d V_opp / d theta_opp
        return self.v_opp.grad[self.n_self:]

    def anticipate(self, eta: float) -> np.ndarray:
        ns = self.n_self
        mixed = self.v_self.hess[ns:, :ns]  # d2 V_self / d theta_opp d theta_self
        return eta * _contract(self.opp_naive, mixed)

    def shape(self, eta: float) -> np.ndarray:
        ns = self.n_self
        mixed = self.v_opp.hess[:ns, ns:]  # d2 V_opp / d theta_self d theta_opp
        return eta * _contract(self.opp_grad_of_self, np.swapaxes(mixed, 0, 1))

    def lola_exact(self, eta: float) -> np.ndarray:
        """Gradient of V_self at the opponent's anticipated parameters.

        The shifted opponent parameters ``theta_opp + eta * dV_opp/dtheta_opp``
        are lifted to first-order DiffScalars over ``theta_self`` (their
        gradient is ``eta`` times the mixed Hessian block of ``V_opp``).
        """
        ns = self.n_self
        shifted = [
            dn.DiffScalar(t + eta * g, eta * self.v_opp.hess[ns + b, :ns])
            for b, (t, g) in enumerate(zip(self.theta_opp, self.opp_naive))
        ]
        own = dn.seed_variables(self.theta_self, order=1)
        v_self, _ = self.pay(own, shifted)
        return v_self.grad


def _sq_norm(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=0)


def sos_scale(naive: np.ndarray, look_ahead: np.ndarray, shaping: np.ndarray,
              a: float = 0.5, b: float = 0.1) -> np.ndarray:
    """Per-player SOS factor p = min(p1, p2)."""
    inner = np.sum(shaping * look_ahead, axis=0)
    la_sq = _sq_norm(look_ahead)
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = np.where(inner >= 0, 1.0, np.minimum(1.0, -a * la_sq / inner))
    naive_sq = _sq_norm(naive)
    p2 = np.where(np.sqrt(naive_sq) < b, naive_sq, 1.0)
    return np.minimum(p1, p2)


def report(d: LocalDerivatives, spec: LearnerSpec) -> GradientReport:
    naive = d.naive
    if spec.kind is Kind.NAIVE:
        return GradientReport(naive, naive, np.zeros_like(naive), naive, np.ones(naive.shape[1:]))
    eta = spec.eta
    look_ahead = naive + d.anticipate(eta)
    chi = d.shape(eta)
    p = np.ones(naive.shape[1:])
    if spec.kind is Kind.LOOKAHEAD:
        final = look_ahead
    elif spec.kind is Kind.LOLA_FIRST_ORDER:
        final = look_ahead + chi
    elif spec.kind is Kind.LOLA:
        final = d.lola_exact(eta)
    else:
        p = sos_scale(naive, look_ahead, chi, spec.a, spec.b)
        final = look_ahead + p * chi
    return GradientReport(naive, look_ahead, chi, final, p)


# -- standalone operators ---------------------------------------------------------


def naive_grad(pay: PayoffFn, theta_self, theta_opp) -> np.ndarray:
    theta_self, theta_opp = _rows(theta_self), _rows(theta_opp)
    ns = len(theta_self)
    xs = dn.seed_variables(theta_self + theta_opp, order=1)
    v_self, _ = pay(xs[:ns], xs[ns:])
    return v_self.grad[:ns]


def lola_exact_grad(pay: PayoffFn, theta_self, theta_opp, eta: float) -> np.ndarray:
    """Exact LOLA gradient by nested differentiation.

    The inner opponent gradient is taken inside the outer differentiation, so
    its dependence on ``theta_self`` enters the result.
    """
    theta_self, theta_opp = _rows(theta_self), _rows(theta_opp)
    ns = len(theta_self)

    def v_opp(*z):
        return pay(list(z[:ns]), list(z[ns:]))[1]

    def shifted_payoff(*own):
        inner = dn.gradient(v_opp, list(own) + theta_opp)
        opp = [t + eta * g for t, g in zip(theta_opp, inner[ns:])]
        return pay(list(own), opp)[0]

    return dn.gradient(shifted_payoff, theta_self)


def lola_first_order_terms(pay: PayoffFn, theta_self, theta_opp, eta: float):
    """``(naive, anticipate, shape)`` summands of the first-order LOLA gradient."""
    d = LocalDerivatives(pay, theta_self, theta_opp)
    return d.naive, d.anticipate(eta), d.shape(eta)


def look_ahead_grad(pay: PayoffFn, theta_self, theta_opp, eta: float) -> np.ndarray:
    d = LocalDerivatives(pay, theta_self, theta_opp)
    return d.naive + d.anticipate(eta)


def sos_grad(pay: PayoffFn, theta_self, theta_opp, eta: float,
             a: float = 0.5, b: float = 0.1) -> GradientReport:
    d = LocalDerivatives(pay, theta_self, theta_opp)
    return report(d, LearnerSpec(Kind.SOS, eta=eta, a=a, b=b))


def gradient_report(game, seat: int, spec: LearnerSpec, theta_self, theta_opp) -> GradientReport:
    pay = perspective(game, seat)
    if not spec.needs_second_order:
        g = naive_grad(pay, theta_self, theta_opp)
        return GradientReport(g, g, np.zeros_like(g), g, np.ones(g.shape[1:]))
    return report(LocalDerivatives(pay, theta_self, theta_opp), spec)


def update_step(spec_a: LearnerSpec, spec_b: LearnerSpec, theta_a, theta_b, game):
    """One simultaneous gradient-ascent step for both players.

    Both gradients are evaluated at the current ``(theta_a, theta_b)``.
    Returns ``(theta_a', theta_b', report_a, report_b)``.
    """
    theta_a = np.asarray(theta_a, dtype=float)
    theta_b = np.asarray(theta_b, dtype=float)
    pay_a, pay_b = perspective(game, 0), perspective(game, 1)
    if spec_a.needs_second_order or spec_b.needs_second_order:
        d_a = LocalDerivatives(pay_a, theta_a, theta_b)
        d_b = d_a.swapped(pay_b)
        rep_a, rep_b = report(d_a, spec_a), report(d_b, spec_b)
    else:
        rep_a = gradient_report(game, 0, spec_a, theta_a, theta_b)
        rep_b = gradient_report(game, 1, spec_b, theta_b, theta_a)
    new_a = theta_a + spec_a.delta * rep_a.final
    new_b = theta_b + spec_b.delta * rep_b.final
    return new_a, new_b, rep_a, rep_b
