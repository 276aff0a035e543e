"""Principals' meta-game: cross-play of a roster of learners.

Cell ``(i, j)`` holds the expected payoff of the row learner ``i`` in the
final single-shot game after training against column learner ``j``.  Both
seatings of a pair share their initial draws (the seat order of the draw is
mirrored), so for symmetric games cell ``(j, i)`` is the exact mirror image
of cell ``(i, j)`` and each unordered pair is simulated once.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from lolasim import learners as L
from lolasim.experiments import ExperimentConfig, mean_std, run_batch, standard_error

WORKERS_ENV = "LOLASIM_WORKERS"


@dataclass(frozen=True)
class Entry:
    name: str
    spec: L.LearnerSpec


def default_roster(delta: float = 1.0) -> list[Entry]:
    return [
        Entry("naive", L.LearnerSpec(L.Kind.NAIVE, delta=delta)),
        Entry("LOLA eta=1", L.LearnerSpec(L.Kind.LOLA, delta=delta, eta=1.0)),
        Entry("LOLA eta=30", L.LearnerSpec(L.Kind.LOLA, delta=delta, eta=30.0)),
        Entry("SOS eta=1", L.LearnerSpec(L.Kind.SOS, delta=delta, eta=1.0)),
        Entry("SOS eta=30", L.LearnerSpec(L.Kind.SOS, delta=delta, eta=30.0)),
    ]


def validate_roster(roster: Sequence[Entry]) -> None:
    if len(roster) < 2:
        raise ValueError("roster needs at least two entries")
    names = [e.name for e in roster]
    if len(set(names)) != len(names):
        raise ValueError("roster names must be unique")


@dataclass
class CrossPlayMatrix:
    names: list
    mean: np.ndarray  # (k, k) row learner's mean final payoff
    std: np.ndarray
    err: np.ndarray  # 2 * std / sqrt(n_sample)
    flags: np.ndarray  # best-response flags
    diverged: np.ndarray  # divergent runs per cell
    n_sample: int
    sos_extremes: np.ndarray | None = None  # (k, k, 3): min inner product, min p, max p

    def cell(self, row: str, col: str) -> float:
        return float(self.mean[self.names.index(row), self.names.index(col)])

    def flagged(self, row: str, col: str) -> bool:
        return bool(self.flags[self.names.index(row), self.names.index(col)])


def mark_best_responses(mean: np.ndarray, err: np.ndarray) -> np.ndarray:
    """Row ``i`` is a best response to column ``j`` within error bars."""
    mean = np.asarray(mean, dtype=float)
    err = np.asarray(err, dtype=float)
    floor = np.max(mean - err, axis=0, keepdims=True)
    return mean + err >= floor


def play_cell(base: ExperimentConfig, roster: Sequence[Entry], i: int, j: int):
    """Final payoffs ``(row, column)`` per run with learner ``i`` as row, ``j`` as column."""
    lo, hi = min(i, j), max(i, j)
    cfg = replace(base, spec_a=roster[i].spec, spec_b=roster[j].spec)
    rec = run_batch(cfg, key=(lo, hi), mirrored=i > j)
    return rec.payoff_a[-1], rec.payoff_b[-1], rec.diverged, sos_extremes(rec)


def sos_extremes(rec) -> tuple[float, float, float]:
    """``(min <xi_SOS, xi_LA>, min p, max p)`` over every SOS evaluation; NaN without SOS."""
    inner = np.concatenate([rec.sos_inner_a.ravel(), rec.sos_inner_b.ravel()])
    p = np.concatenate([rec.sos_p_a.ravel(), rec.sos_p_b.ravel()])
    inner, p = inner[~np.isnan(inner)], p[~np.isnan(p)]
    if not len(p):
        return (math.nan,) * 3
    return float(inner.min()), float(p.min()), float(p.max())


def _play(args):
    return play_cell(*args)


def _workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def cross_play(roster: Sequence[Entry], game: str = "pd", steps: int = 1000, n_sample: int = 100,
               seed: int = 0, workers: int | None = None, symmetric: bool | None = None,
               payoffs=None) -> CrossPlayMatrix:
    validate_roster(roster)
    base = ExperimentConfig(game=game, steps=steps, n_sample=n_sample, seed=seed, payoffs=payoffs)
    if symmetric is None:
        symmetric = getattr(base.make_game(), "symmetric", False)
    k = len(roster)
    if symmetric:
        cells = [(i, j) for i in range(k) for j in range(i, k)]
    else:
        cells = [(i, j) for i in range(k) for j in range(k)]
    jobs = [(base, list(roster), i, j) for i, j in cells]
    workers = min(workers or _workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_play, jobs))
    else:
        results = [_play(job) for job in jobs]

    samples = np.empty((k, k, n_sample))
    diverged = np.zeros((k, k), dtype=int)
    sos = np.full((k, k, 3), np.nan)
    for (i, j), (row, col, div, extremes) in zip(cells, results):
        sos[i, j] = sos[j, i] = extremes
        samples[i, j] = row
        diverged[i, j] = div.sum()
        if symmetric and i != j:
            samples[j, i] = col
            diverged[j, i] = div.sum()
    mean, std = mean_std(samples)
    err = standard_error(std, n_sample)
    return CrossPlayMatrix(
        names=[e.name for e in roster],
        mean=mean,
        std=std,
        err=err,
        flags=mark_best_responses(mean, err),
        diverged=diverged,
        n_sample=n_sample,
        sos_extremes=sos,
    )


def mutual_best_responses(m: CrossPlayMatrix) -> list[tuple[str, str]]:
    k = len(m.names)
    return [
        (m.names[i], m.names[j])
        for i in range(k)
        for j in range(i, k)
        if m.flags[i, j] and m.flags[j, i]
    ]
