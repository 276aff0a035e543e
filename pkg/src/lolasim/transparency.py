"""Action distributions of two players who can predict each other.

A transparent policy is the tuple ``(p_predict, v, M)``: with probability
``p_predict`` the player predicts how the opponent will act against it and
responds via the reaction matrix ``M`` (column ``j`` is the response to
predicted opponent action ``j``); otherwise it draws from the
opponent-independent distribution ``v``.

All linear algebra below is written over plain Python sequences so that the
entries may be floats, numpy arrays (a batch of policies) or
:class:`~lolasim.diffnum.DiffScalar` values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lolasim.diffnum import value_of

EPSILON = 1e-3


@dataclass(frozen=True)
class TransparentPolicy:
    p_predict: object
    v: tuple
    M: tuple  # M[i][j]: probability of own action i after predicting opponent action j

    @property
    def n_actions(self) -> int:
        return len(self.v)

    def validate(self, eps: float = EPSILON, atol: float = 1e-9) -> None:
        p = value_of(self.p_predict)
        if np.any(p < 0) or np.any(p > 1 - eps + atol):
            raise ValueError(f"prediction probability must lie in [0, 1-eps], got {p}")
        v = np.array([value_of(x) for x in self.v])
        if np.any(v < -atol) or np.any(np.abs(v.sum(axis=0) - 1) > atol):
            raise ValueError("v must be a probability vector")
        M = np.array([[value_of(x) for x in row] for row in self.M])
        if M.shape[0] != len(self.v):
            raise ValueError("reaction matrix rows must match the number of actions")
        if np.any(M < -atol) or np.any(np.abs(M.sum(axis=0) - 1) > atol):
            raise ValueError("columns of the reaction matrix must be probability vectors")


def policy(p_predict, v: Sequence, M: Sequence[Sequence]) -> TransparentPolicy:
    return TransparentPolicy(p_predict, tuple(v), tuple(tuple(row) for row in M))


def grounded_fair_bot(eps: float = EPSILON) -> TransparentPolicy:
    """Predicts with probability 1-eps, mirrors the prediction, else cooperates."""
    return policy(1 - eps, (1.0, 0.0), ((1.0, 0.0), (0.0, 1.0)))


def unconditional(action: int, n_actions: int = 2) -> TransparentPolicy:
    v = [0.0] * n_actions
    v[action] = 1.0
    return policy(0.0, v, [[1.0 / n_actions] * n_actions for _ in range(n_actions)])


# -- small dense linear algebra over generic scalars --------------------------


def matvec(A: Sequence[Sequence], x: Sequence) -> list:
    return [_dot(row, x) for row in A]


def matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> list:
    cols = list(zip(*B))
    return [[_dot(row, col) for col in cols] for row in A]


def _dot(xs: Sequence, ys: Sequence):
    acc = xs[0] * ys[0]
    for x, y in zip(xs[1:], ys[1:]):
        acc = acc + x * y
    return acc


def solve(A: Sequence[Sequence], b: Sequence) -> list:
    """Gaussian elimination without pivoting.

    Only used on ``I - c*K`` with ``K`` column-stochastic and ``c < 1``, which
    is strictly diagonally dominant by columns, so no pivoting is needed.
    """
    n = len(b)
    A = [list(row) for row in A]
    b = list(b)
    for k in range(n):
        piv = A[k][k]
        if np.any(value_of(piv) == 0):
            raise np.linalg.LinAlgError("singular system in transparent distribution")
        for i in range(k + 1, n):
            f = A[i][k] / piv
            for j in range(k + 1, n):
                A[i][j] = A[i][j] - f * A[k][j]
            b[i] = b[i] - f * b[k]
    x = [None] * n
    for i in reversed(range(n)):
        acc = b[i]
        for j in range(i + 1, n):
            acc = acc - A[i][j] * x[j]
        x[i] = acc / A[i][i]
    return x


# -- closed form ---------------------------------------------------------------


def transparent_distribution(own: TransparentPolicy, opp: TransparentPolicy) -> list:
    """Distribution over ``own``'s actions when playing against ``opp``."""
    p_own, p_opp = own.p_predict, opp.p_predict
    c = p_own * p_opp
    loop = matmul(own.M, opp.M)
    n = own.n_actions
    system = [
        [(1.0 - c * loop[i][j]) if i == j else (-(c * loop[i][j])) for j in range(n)]
        for i in range(n)
    ]
    react = matvec(own.M, opp.v)
    w_direct = 1.0 - p_own
    w_react = p_own * (1.0 - p_opp)
    rhs = [w_direct * own.v[i] + w_react * react[i] for i in range(n)]
    return solve(system, rhs)


def transparent_distributions(pol_a: TransparentPolicy, pol_b: TransparentPolicy):
    # Same routine for both players, so swapping the policies swaps the output exactly.
    return transparent_distribution(pol_a, pol_b), transparent_distribution(pol_b, pol_a)


# -- truncated series (oracle) ----------------------------------------------------


def _numeric(pol: TransparentPolicy):
    return (
        float(value_of(pol.p_predict)),
        np.array([float(value_of(x)) for x in pol.v]),
        np.array([[float(value_of(x)) for x in row] for row in pol.M]),
    )


def series_oracle(pol_a: TransparentPolicy, pol_b: TransparentPolicy, tol: float = 1e-12,
                  return_terms: bool = False):
    """Sum the alternating-prediction series until the geometric tail is below ``tol``.

    Each summand has L1 mass at most ``c**k`` with ``c = p_a*p_b`` (reaction
    matrices are column-stochastic), so after ``k`` terms the remainder is at
    most ``c**k / (1 - c)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pa, va, Ma = _numeric(pol_a)
    pb, vb, Mb = _numeric(pol_b)
    c = pa * pb
    loop_a = c * Ma @ Mb
    loop_b = c * Mb @ Ma
    term_a = (1 - pa) * va + pa * (1 - pb) * Ma @ vb
    term_b = (1 - pb) * vb + pb * (1 - pa) * Mb @ va
    w_a = np.zeros_like(term_a)
    w_b = np.zeros_like(term_b)
    k = 0
    while True:
        w_a += term_a
        w_b += term_b
        k += 1
        if c**k / (1 - c) < tol:
            break
        term_a = loop_a @ term_a
        term_b = loop_b @ term_b
    if return_terms:
        return w_a, w_b, k
    return w_a, w_b
