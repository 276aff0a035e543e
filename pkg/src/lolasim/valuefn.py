"""Parameter-to-payoff pipeline for transparent 2x2 games.

Parameter layout per agent (fixed, used for seeding and CSV columns)::

    theta = (theta_S, theta_C|notS, theta_C|C, theta_C|D)

``sigmoid`` maps each entry to a probability; only the prediction
probability ``Pr[S]`` is clamped to ``[0, 1 - eps]``.  Action 0 is C, action
1 is D.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from lolasim import diffnum as dn
from lolasim.transparency import EPSILON, TransparentPolicy, policy, transparent_distribution

PARAM_NAMES = ("S", "C|notS", "C|C", "C|D")
N_PARAMS = len(PARAM_NAMES)
OUTCOMES = ("CC", "CD", "DC", "DD")


def params_to_policy(theta: Sequence, eps: float = EPSILON) -> TransparentPolicy:
    if len(theta) != N_PARAMS:
        raise ValueError(f"expected {N_PARAMS} parameters, got {len(theta)}")
    s, c_indep, c_after_c, c_after_d = (dn.sigmoid(t) for t in theta)
    p_predict = dn.minimum(s, 1.0 - eps)
    return policy(
        p_predict,
        (c_indep, 1.0 - c_indep),
        ((c_after_c, c_after_d), (1.0 - c_after_c, 1.0 - c_after_d)),
    )


def policy_probabilities(theta: Sequence, eps: float = EPSILON) -> np.ndarray:
    """(Pr[S], Pr[C|notS], Pr[C|C], Pr[C|D]) with Pr[S] clamped."""
    theta = [dn.value_of(t) for t in theta]
    probs = [dn.sigmoid(t) for t in theta]
    probs[0] = np.minimum(probs[0], 1.0 - eps)
    return np.stack(probs)


def _own_payoff(w_own, w_opp, table_own):
    # table_own[i][j]: payoff for own action i against opponent action j.
    # Own-major summation keeps the two players' computations mirror images.
    total = None
    for i, wi in enumerate(w_own):
        for j, wj in enumerate(w_opp):
            term = (wi * wj) * float(table_own[i][j])
            total = term if total is None else total + term
    return total


def distributions(theta_a: Sequence, theta_b: Sequence, eps: float = EPSILON):
    pol_a = params_to_policy(theta_a, eps)
    pol_b = params_to_policy(theta_b, eps)
    return transparent_distribution(pol_a, pol_b), transparent_distribution(pol_b, pol_a)


def expected_payoffs(game, theta_a: Sequence, theta_b: Sequence, eps: float = EPSILON):
    """Exact expected payoffs ``(V_A, V_B)``; differentiable in all inputs."""
    w_a, w_b = distributions(theta_a, theta_b, eps)
    v_a = _own_payoff(w_a, w_b, game.payoff_a)
    v_b = _own_payoff(w_b, w_a, np.transpose(game.payoff_b))
    return v_a, v_b


def outcome_probabilities(theta_a: Sequence, theta_b: Sequence, eps: float = EPSILON) -> np.ndarray:
    """(P_CC, P_CD, P_DC, P_DD) stacked along the first axis; first letter is A's action."""
    theta_a = [dn.value_of(t) for t in theta_a]
    theta_b = [dn.value_of(t) for t in theta_b]
    w_a, w_b = distributions(theta_a, theta_b, eps)
    return np.stack([w_a[0] * w_b[0], w_a[0] * w_b[1], w_a[1] * w_b[0], w_a[1] * w_b[1]])
