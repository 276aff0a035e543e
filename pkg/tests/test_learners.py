import math

import numpy as np
import pytest

from lolasim import games
from lolasim import learners as L

from oracles import lola_oracle, naive_oracle, rel_err

ORDER_ETA = 1e-3


def random_pd_point(seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return rng.normal(scale=scale, size=4), rng.normal(scale=scale, size=4)


# -- naive ------------------------------------------------------------------------


def test_ultimatum_proposer_gradient_vanishes_at_five_eighths():
    pay = L.perspective(games.ultimatum(), 0)
    g = L.naive_grad(pay, [0.7], [math.log(5 / 3)])
    assert abs(g[0]) < 1e-15


def test_ultimatum_naive_matches_closed_form():
    rng = np.random.default_rng(0)
    u = games.ultimatum()
    for ta, tb in rng.normal(scale=3, size=(100, 2)):
        ga = L.naive_grad(L.perspective(u, 0), [ta], [tb])[0]
        gb = L.naive_grad(L.perspective(u, 1), [tb], [ta])[0]
        ea, eb = games.ultimatum_naive_gradients(ta, tb)
        assert abs(ga - ea) < 1e-10 and abs(gb - eb) < 1e-10


def test_tandem_naive_at_origin():
    assert L.naive_grad(L.perspective(games.tandem(), 0), [0.0], [0.0]).tolist() == [2.0]


def test_defection_dominant_for_saturated_defectors():
    g = games.pd()
    ta = np.array([-10.0, -10.0, 0.3, -0.2])
    tb = np.array([-10.0, -10.0, -0.1, 0.4])
    grad = L.naive_grad(L.perspective(g, 0), ta, tb)
    fd = naive_oracle(g, 0, ta, tb)
    assert grad[1] < 0 and fd[1] < 0
    assert rel_err(grad, fd) < 1e-4


@pytest.mark.parametrize("make", [games.pd, games.chicken, games.ultimatum, games.tandem])
def test_naive_gradients_match_finite_differences(make):
    g = make()
    rng = np.random.default_rng(1)
    for _ in range(20):
        ta, tb = rng.normal(size=(2, g.n_params))
        for seat, own, opp in ((0, ta, tb), (1, tb, ta)):
            grad = L.naive_grad(L.perspective(g, seat), own, opp)
            assert rel_err(grad, naive_oracle(g, seat, own, opp)) < 1e-4


# -- LOLA ----------------------------------------------------------------------------


def test_lola_with_zero_eta_is_naive():
    ta, tb = random_pd_point(2)
    pay = L.perspective(games.pd(), 0)
    assert np.array_equal(L.lola_exact_grad(pay, ta, tb, 0.0), L.naive_grad(pay, ta, tb))
    d = L.LocalDerivatives(pay, ta, tb)
    assert np.max(np.abs(d.lola_exact(0.0) - d.naive)) < 1e-12


def test_nested_and_shared_lola_agree():
    g = games.chicken()
    for seed in range(5):
        ta, tb = random_pd_point(seed)
        for eta in (0.3, 1.0, 10.0):
            for seat, own, opp in ((0, ta, tb), (1, tb, ta)):
                pay = L.perspective(g, seat)
                nested = L.lola_exact_grad(pay, own, opp, eta)
                shared = L.LocalDerivatives(pay, own, opp).lola_exact(eta)
                assert np.allclose(nested, shared, rtol=1e-12, atol=1e-12)


def test_tandem_lola_matches_finite_differences():
    t = games.tandem()
    got = L.lola_exact_grad(L.perspective(t, 0), [0.0], [0.0], 0.1)
    assert abs(got[0] - lola_oracle(t, [0.0], [0.0], 0.1)[0]) < 1e-5


@pytest.mark.parametrize("seed", range(10))
def test_pd_lola_matches_two_level_oracle(seed):
    g = games.pd()
    ta, tb = random_pd_point(100 + seed)
    got = L.lola_exact_grad(L.perspective(g, 0), ta, tb, 1.0)
    assert rel_err(got, lola_oracle(g, ta, tb, 1.0)) < 1e-4


def test_tandem_lola_fixed_points():
    t = games.tandem()
    spec = L.LearnerSpec("lola", delta=0.1, eta=0.1)
    x, y = np.array([[0.3, -1.0, 2.0]]), np.array([[0.0, 0.5, -1.5]])
    for _ in range(3000):
        x, y, _, _ = L.update_step(spec, spec, x, y, t)
    assert np.all(np.abs((x + y) - games.tandem_sfp_sum(0.1)) < 1e-3)


# -- first-order terms -----------------------------------------------------------------


def test_first_order_terms_vanish_without_eta():
    ta, tb = random_pd_point(3)
    naive, anticipate, shape = L.lola_first_order_terms(L.perspective(games.pd(), 0), ta, tb, 0.0)
    assert not anticipate.any() and not shape.any()


def test_tandem_first_order_terms_by_hand():
    # V_A = -(x+y)^2 + 2x: dV_B/dy = 2, dV_A/dy = 0 and all mixed partials are -2 at the origin.
    naive, anticipate, shape = L.lola_first_order_terms(
        L.perspective(games.tandem(), 0), [0.0], [0.0], 0.1
    )
    assert naive[0] == 2.0
    assert anticipate[0] == pytest.approx(-0.4, abs=1e-15)
    assert shape[0] == 0.0
    _, anticipate, shape = L.lola_first_order_terms(
        L.perspective(games.tandem(), 0), [0.5], [0.25], 0.1
    )
    # dV_B/dy = -2(x+y) + 2 = 0.5, dV_A/dy = -2(x+y) = -1.5
    assert anticipate[0] == pytest.approx(0.1 * 0.5 * -2)
    assert shape[0] == pytest.approx(0.1 * -1.5 * -2)


def test_truncation_error_is_second_order():
    pay = L.perspective(games.pd(), 0)
    for seed in range(20):
        ta, tb = random_pd_point(200 + seed)

        def residual(eta):
            parts = L.lola_first_order_terms(pay, ta, tb, eta)
            return np.linalg.norm(L.lola_exact_grad(pay, ta, tb, eta) - sum(parts))

        assert 3.5 <= residual(ORDER_ETA) / residual(ORDER_ETA / 2) <= 4.5


def test_look_ahead_kind():
    g = games.pd()
    ta, tb = random_pd_point(4)
    spec = L.LearnerSpec("la", eta=2.0)
    rep = L.gradient_report(g, 0, spec, ta, tb)
    naive, anticipate, _ = L.lola_first_order_terms(L.perspective(g, 0), ta, tb, 2.0)
    assert np.allclose(rep.final, naive + anticipate, rtol=0, atol=1e-12)
    assert np.allclose(L.look_ahead_grad(L.perspective(g, 0), ta, tb, 2.0), rep.final)


def test_first_order_lola_kind():
    g = games.pd()
    ta, tb = random_pd_point(5)
    rep = L.gradient_report(g, 0, L.LearnerSpec("lola1", eta=0.5), ta, tb)
    assert np.allclose(rep.final, sum(L.lola_first_order_terms(L.perspective(g, 0), ta, tb, 0.5)))


# -- SOS ------------------------------------------------------------------------------------


def test_sos_scale_cases():
    naive = np.array([1.0, 0.0])
    la = np.array([1.0, 1.0])
    assert L.sos_scale(naive, la, np.array([0.5, 0.5])) == 1.0
    # <chi, la> = -4: p1 = 0.5 * 2 / 4
    assert L.sos_scale(naive, la, np.array([-2.0, -2.0])) == pytest.approx(0.25)
    # tiny inner product: p1 would exceed 1
    assert L.sos_scale(naive, la, np.array([-0.1, 0.0])) == 1.0
    small = np.array([0.05, 0.0])
    assert L.sos_scale(small, la, np.array([0.5, 0.5])) == pytest.approx(0.0025)


def test_sos_full_shaping_when_unconstrained():
    g = games.pd()
    for seed in range(50):
        ta, tb = random_pd_point(seed)
        rep = L.sos_grad(L.perspective(g, 0), ta, tb, 1.0)
        inner = float(np.dot(rep.shaping, rep.look_ahead))
        if inner >= 0 and np.linalg.norm(rep.naive) >= 0.1:
            assert rep.p == 1.0
            parts = L.lola_first_order_terms(L.perspective(g, 0), ta, tb, 1.0)
            assert np.max(np.abs(rep.final - sum(parts))) < 1e-10
            return
    pytest.fail("no unconstrained point found")


def test_sos_null_game():
    g = games.custom(np.zeros((2, 2, 2)))
    rep = L.sos_grad(L.perspective(g, 0), np.zeros(4), np.zeros(4), 1.0)
    assert rep.p == 0.0
    assert not rep.final.any() and not rep.look_ahead.any()


def test_sos_inner_product_bound_on_adversarial_points():
    g = games.pd()
    hits = 0
    for seed in range(300):
        ta, tb = random_pd_point(seed, scale=2.0)
        for eta in (1.0, 10.0):
            rep = L.sos_grad(L.perspective(g, 0), ta, tb, eta)
            la_sq = float(np.dot(rep.look_ahead, rep.look_ahead))
            inner = float(np.dot(rep.final, rep.look_ahead))
            assert inner >= (1 - 0.5) * la_sq - 1e-9 * max(1.0, la_sq)
            assert 0.0 <= rep.p <= 1.0
            if np.dot(rep.shaping, rep.look_ahead) < 0:
                hits += 1
    assert hits > 10


def test_sos_convergence_guard():
    g = games.chicken()
    rng = np.random.default_rng(6)
    checked = 0
    for _ in range(400):
        ta, tb = rng.normal(scale=4.0, size=(2, 4))
        rep = L.sos_grad(L.perspective(g, 0), ta, tb, 3.0)
        n = np.linalg.norm(rep.naive)
        if n < 0.1:
            checked += 1
            assert np.linalg.norm(rep.p * rep.shaping) <= n**2 * np.linalg.norm(rep.shaping) + 1e-15
    assert checked > 0


# -- update step ----------------------------------------------------------------------------


def test_update_step_tandem_origin():
    spec = L.LearnerSpec("naive", delta=0.1)
    x, y, _, _ = L.update_step(spec, spec, [0.0], [0.0], games.tandem())
    assert x.tolist() == pytest.approx([0.2]) and y.tolist() == pytest.approx([0.2])


def test_zero_learning_rate_freezes_parameters():
    ta, tb = random_pd_point(7)
    spec = L.LearnerSpec("sos", delta=0.0, eta=3.0)
    na, nb, _, _ = L.update_step(spec, spec, ta, tb, games.pd())
    assert np.array_equal(na, ta) and np.array_equal(nb, tb)


@pytest.mark.parametrize("kind", list(L.Kind))
def test_player_symmetry(kind):
    ta, _ = random_pd_point(8)
    spec = L.LearnerSpec(kind, eta=2.0)
    na, nb, ra, rb = L.update_step(spec, spec, ta, ta.copy(), games.chicken())
    assert np.array_equal(na, nb)
    for field in ("naive", "look_ahead", "shaping", "final"):
        assert np.array_equal(getattr(ra, field), getattr(rb, field))


def test_simultaneous_updates_use_current_parameters():
    g = games.pd()
    ta, tb = random_pd_point(9)
    sa, sb = L.LearnerSpec("lola", eta=1.0), L.LearnerSpec("sos", eta=3.0)
    na, nb, _, _ = L.update_step(sa, sb, ta, tb, g)
    ra = L.gradient_report(g, 0, sa, ta, tb)
    rb = L.gradient_report(g, 1, sb, tb, ta)
    assert np.allclose(na, ta + ra.final, rtol=0, atol=1e-12)
    assert np.allclose(nb, tb + rb.final, rtol=0, atol=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        L.LearnerSpec("lola", delta=-1)
    with pytest.raises(ValueError):
        L.LearnerSpec("lola", eta=-0.1)
    with pytest.raises(ValueError):
        L.LearnerSpec("sos", a=1.0)
    with pytest.raises(ValueError):
        L.LearnerSpec("maml")
