import numpy as np
import pytest

from lolasim import experiments as E
from lolasim import learners as L
from lolasim import tournament as T


def test_default_roster():
    names = [e.name for e in T.default_roster()]
    assert names == ["naive", "LOLA eta=1", "LOLA eta=30", "SOS eta=1", "SOS eta=30"]


def test_roster_validation():
    with pytest.raises(ValueError):
        T.validate_roster(T.default_roster()[:1])
    with pytest.raises(ValueError):
        T.validate_roster([T.Entry("x", L.LearnerSpec("naive"))] * 2)


def test_best_response_single_row():
    assert T.mark_best_responses(np.array([[1.0, -3.0]]), np.zeros((1, 2))).all()


def test_best_response_constant_matrix():
    assert T.mark_best_responses(np.full((3, 3), 7.0), np.zeros((3, 3))).all()


def test_best_response_error_bars():
    mean = np.array([[10.0, 0.0], [9.5, 5.0]])  # 9.5 + 0.5 reaches 10 - 0.1
    err = np.array([[0.1, 0.1], [0.5, 0.1]])
    assert T.mark_best_responses(mean, err).tolist() == [[True, False], [True, True]]
    assert T.mark_best_responses(mean, 0 * err).tolist() == [[True, False], [False, True]]


def test_best_responses_shift_invariant():
    rng = np.random.default_rng(0)
    mean, err = rng.normal(size=(4, 4)), rng.uniform(0, 0.5, size=(4, 4))
    flags = T.mark_best_responses(mean, err)
    assert np.array_equal(flags, T.mark_best_responses(mean + 100.0, err))


def test_mirrored_cells_agree_bitwise():
    roster = T.default_roster()
    base = E.ExperimentConfig(game="chicken", steps=15, n_sample=4, seed=1)
    row, col, _, sos = T.play_cell(base, roster, 1, 3)
    row2, col2, _, sos2 = T.play_cell(base, roster, 3, 1)
    assert np.array_equal(row, col2) and np.array_equal(col, row2)
    assert sos == sos2 and sos[0] >= 0 and 0 <= sos[1] <= sos[2] <= 1


def test_small_cross_play():
    roster = T.default_roster()[:3]
    m = T.cross_play(roster, game="pd", steps=10, n_sample=3, workers=1)
    assert m.mean.shape == (3, 3)
    assert m.flags.any(axis=0).all()
    row, col, _, sos = T.play_cell(E.ExperimentConfig(game="pd", steps=10, n_sample=3), roster, 0, 2)
    assert np.isnan(sos).all() and np.isnan(m.sos_extremes).all()
    assert m.cell("naive", "LOLA eta=30") == pytest.approx(row.mean())
    assert m.cell("LOLA eta=30", "naive") == pytest.approx(col.mean())
    full = T.cross_play(roster, game="pd", steps=10, n_sample=3, workers=1, symmetric=False)
    assert np.allclose(full.mean, m.mean, atol=1e-12)
    for a, b in T.mutual_best_responses(m):
        assert m.flagged(a, b) and m.flagged(b, a)


def test_cross_play_in_parallel_matches_serial():
    roster = T.default_roster()[:2]
    kw = dict(game="chicken", steps=5, n_sample=2)
    assert np.array_equal(T.cross_play(roster, workers=2, **kw).mean,
                          T.cross_play(roster, workers=1, **kw).mean)
