"""Payoff definitions: transparent 2x2 matrix games, ultimatum and tandem.

Every game exposes ``n_params`` (per player) and ``payoffs(theta_a,
theta_b) -> (V_A, V_B)`` evaluated over floats, arrays or DiffScalars.

Matrix orientation: ``payoff_a[i][j]`` and ``payoff_b[i][j]`` are the
payoffs when A plays ``i`` and B plays ``j`` (rows are A's own action).
For symmetric games ``payoff_b`` is the transpose of ``payoff_a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from lolasim import diffnum as dn
from lolasim import valuefn

ACTIONS = ("C", "D")


@dataclass(frozen=True)
class MatrixGame2x2:
    name: str
    payoff_a: tuple
    payoff_b: tuple
    labels: tuple = ACTIONS
    n_params: int = field(default=valuefn.N_PARAMS, init=False)

    def payoffs(self, theta_a, theta_b):
        return valuefn.expected_payoffs(self, theta_a, theta_b)

    @property
    def symmetric(self) -> bool:
        return np.array_equal(np.array(self.payoff_b), np.array(self.payoff_a).T)


def _symmetric(name: str, R: float, S: float, T: float, P: float, labels=ACTIONS) -> MatrixGame2x2:
    table = ((float(R), float(S)), (float(T), float(P)))
    return MatrixGame2x2(name, table, tuple(zip(*table)), labels)


def pd() -> MatrixGame2x2:
    return _symmetric("pd", R=30, S=0, T=40, P=10)


def chicken() -> MatrixGame2x2:
    return _symmetric("chicken", R=30, S=0, T=40, P=-30, labels=("swerve", "straight"))


def custom(payoffs: Sequence[Sequence[Sequence[float]]], name: str = "custom") -> MatrixGame2x2:
    """Build a game from a table of ``(payoff_A, payoff_B)`` pairs, rows = A's action."""
    cells = np.asarray(payoffs, dtype=float)
    if cells.shape != (2, 2, 2):
        raise ValueError("custom payoffs must be a 2x2 table of (A, B) pairs")
    if not np.all(np.isfinite(cells)):
        raise ValueError("custom payoffs must be finite")
    a = tuple(tuple(float(x) for x in row) for row in cells[:, :, 0])
    b = tuple(tuple(float(x) for x in row) for row in cells[:, :, 1])
    return MatrixGame2x2(name, a, b)


@dataclass(frozen=True)
class Ultimatum:
    """Binary ultimatum game; B always accepts fair splits.

    theta_a -> p_fair = sigmoid(theta_a[0]); theta_b -> p_accept = sigmoid(theta_b[0]).
    """

    name: str = "ultimatum"
    n_params: int = 1

    def payoffs(self, theta_a, theta_b):
        p_fair = dn.sigmoid(theta_a[0])
        p_accept = dn.sigmoid(theta_b[0])
        unfair_accepted = (1.0 - p_fair) * p_accept
        return 5.0 * p_fair + 8.0 * unfair_accepted, 5.0 * p_fair + 2.0 * unfair_accepted


@dataclass(frozen=True)
class Tandem:
    name: str = "tandem"
    n_params: int = 1

    def payoffs(self, theta_a, theta_b):
        x, y = theta_a[0], theta_b[0]
        s = x + y
        coord = s * s
        return -coord + 2.0 * x, -coord + 2.0 * y


def ultimatum() -> Ultimatum:
    return Ultimatum()


def tandem() -> Tandem:
    return Tandem()


GAMES = {"pd": pd, "chicken": chicken, "ultimatum": ultimatum, "tandem": tandem}


def get(name: str):
    try:
        return GAMES[name]()
    except KeyError:
        raise ValueError(f"unknown game {name!r}; choose from {sorted(GAMES)}") from None


def ultimatum_naive_gradients(theta_a: float, theta_b: float) -> tuple[float, float]:
    """Closed-form naive gradients of the ultimatum game."""
    p_fair = float(dn.sigmoid(theta_a))
    p_accept = float(dn.sigmoid(theta_b))
    return (
        (5.0 - 8.0 * p_accept) * p_fair * (1.0 - p_fair),
        2.0 * (1.0 - p_fair) * p_accept * (1.0 - p_accept),
    )


def tandem_sfp_sum(eta: float) -> float:
    """Value of x + y on the stable fixed points of two exact-LOLA learners."""
    if not math.isfinite(eta) or eta < 0 or eta >= 0.5:
        raise ValueError("tandem fixed-point line is defined for eta in [0, 0.5)")
    return (1.0 - 2.0 * eta + 4.0 * eta**2) / (1.0 - 2.0 * eta) ** 2


def tandem_welfare(x: float, y: float) -> float:
    """Closed form of ``V_A + V_B`` for the tandem game."""
    # -2(x+y)^2 + 2(x+y), completed to a square.
    return -2.0 * (x + y - 0.5) ** 2 + 0.5
