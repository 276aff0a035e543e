"""Independent reference computations for the test-suite.

Nothing here touches the differentiation engine: everything works on plain
floats with central finite differences.
"""

import numpy as np

H = 1e-5


def central_gradient(f, x, h=H):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def payoff(game, seat):
    """Plain-float payoff of one seat as a function of the stacked parameters."""
    n = game.n_params

    def f(z):
        return float(game.payoffs(list(z[:n]), list(z[n:]))[seat])

    return f


def naive_oracle(game, seat, theta_self, theta_opp, h=H):
    n = game.n_params
    own = np.asarray(theta_self, dtype=float)
    opp = np.asarray(theta_opp, dtype=float)
    z = np.r_[own, opp] if seat == 0 else np.r_[opp, own]
    g = central_gradient(payoff(game, seat), z, h)
    return g[:n] if seat == 0 else g[n:]


def lola_oracle(game, theta_a, theta_b, eta, h_outer=1e-4, h_inner=1e-5):
    """Two-level finite differences of A's payoff at B's anticipated parameters."""
    theta_b = np.asarray(theta_b, dtype=float)

    def shifted(own):
        inner = naive_oracle(game, 1, theta_b, own, h_inner)
        return float(game.payoffs(list(own), list(theta_b + eta * inner))[0])

    return central_gradient(shifted, theta_a, h_outer)


def rel_err(a, b, floor=1e-3):
    """Max relative error, falling back to absolute error below ``floor``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


def mixed_partials(f, z, rows, cols, h=H):
    """Block ``d2 f / dz[rows] dz[cols]`` by the four-point central formula."""
    z = np.asarray(z, dtype=float)
    out = np.empty((len(rows), len(cols)))
    for r, i in enumerate(rows):
        for c, j in enumerate(cols):
            ei, ej = np.zeros_like(z), np.zeros_like(z)
            ei[i], ej[j] = h, h
            out[r, c] = (f(z + ei + ej) - f(z + ei - ej) - f(z - ei + ej) + f(z - ei - ej)) / (4 * h * h)
    return out


def _stacked(game, seat, theta_self, theta_opp):
    own = np.asarray(theta_self, dtype=float)
    opp = np.asarray(theta_opp, dtype=float)
    n = game.n_params
    z = np.r_[own, opp] if seat == 0 else np.r_[opp, own]
    me = list(range(n)) if seat == 0 else list(range(n, 2 * n))
    them = list(range(n, 2 * n)) if seat == 0 else list(range(n))
    return z, me, them


def lola_oracle_seat(game, seat, theta_self, theta_opp, eta, h_outer=1e-4, h_inner=H):
    theta_opp = np.asarray(theta_opp, dtype=float)

    def shifted(own):
        inner = naive_oracle(game, 1 - seat, theta_opp, own, h_inner)
        args = (list(own), list(theta_opp + eta * inner))
        return float(game.payoffs(*(args if seat == 0 else args[::-1]))[seat])

    return central_gradient(shifted, theta_self, h_outer)


def learner_oracle(game, seat, kind, eta, theta_self, theta_opp, a=0.5, b=0.1, h=H, h2=1e-4):
    """Finite-difference version of every learner's update direction."""
    z, me, them = _stacked(game, seat, theta_self, theta_opp)
    v_self, v_opp = payoff(game, seat), payoff(game, 1 - seat)
    g_self = central_gradient(v_self, z, h)
    naive = g_self[me]
    if kind == "naive":
        return naive
    if kind == "lola":
        return lola_oracle_seat(game, seat, theta_self, theta_opp, eta, h_outer=h2, h_inner=h)
    g_opp = central_gradient(v_opp, z, h)[them]
    anticipate = eta * mixed_partials(v_self, z, me, them, h2) @ g_opp
    shape = eta * mixed_partials(v_opp, z, me, them, h2) @ g_self[them]
    la = naive + anticipate
    if kind == "la":
        return la
    if kind == "lola1":
        return la + shape
    inner = float(shape @ la)
    p1 = 1.0 if inner >= 0 else min(1.0, -a * float(la @ la) / inner)
    p2 = float(naive @ naive) if np.linalg.norm(naive) < b else 1.0
    return la + min(p1, p2) * shape


def norm_rel_err(a, b, floor=1e-3):
    """Relative error of a whole vector, absolute below ``floor``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor))
