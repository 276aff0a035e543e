"""Seeded training runs and the aggregate experiments built on them.

Runs of one configuration are simulated together: parameters carry a
trailing run axis and every operation is elementwise across runs, so a
run's trajectory does not depend on which other runs share its batch.

Seeding: run ``r`` of a configuration with master seed ``s`` draws its
initial parameters from ``numpy.random.default_rng(SeedSequence([s, *key,
r]))`` (``key`` is empty for plain runs and identifies the cell in a
tournament).  Player A's parameters are drawn first unless the draw is
mirrored, in which case B's are.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from lolasim import games as games_mod
from lolasim import learners as L
from lolasim import valuefn

DIVERGENCE_BOUND = 1e6
ETA_GRID = (0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0)
EGFB_THETA = (3.0, 3.0, 3.0, -3.0)


class Init(str, enum.Enum):
    GAUSS = "gauss"
    EGFB = "egfb"
    GAUSS_UNIT = "gauss-unit"


@dataclass(frozen=True)
class ExperimentConfig:
    game: str = "pd"
    spec_a: L.LearnerSpec = field(default_factory=lambda: L.LearnerSpec(L.Kind.NAIVE))
    spec_b: L.LearnerSpec = field(default_factory=lambda: L.LearnerSpec(L.Kind.NAIVE))
    steps: int = 1000
    n_sample: int = 100
    init: Init | None = None  # None: game default (gauss-unit for tandem, gauss otherwise)
    sigma: float | None = None  # None: 1.0 for gauss-unit, 0.1 otherwise
    seed: int = 0
    payoffs: tuple | None = None  # custom 2x2 table of (A, B) pairs

    def __post_init__(self):
        if self.init is not None:
            object.__setattr__(self, "init", Init(self.init))
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.n_sample < 1:
            raise ValueError("n_sample must be positive")
        if self.game not in games_mod.GAMES and self.game != "custom":
            raise ValueError(f"unknown game {self.game!r}")
        if self.game == "custom" and self.payoffs is None:
            raise ValueError("custom game needs a payoff table")
        if self.resolved_init is Init.EGFB and not self.is_matrix_game:
            raise ValueError("egfb initialization only applies to transparent matrix games")
        if self.sigma is not None and not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")

    @property
    def is_matrix_game(self) -> bool:
        return self.game in ("pd", "chicken", "custom")

    @property
    def resolved_init(self) -> Init:
        if self.init is not None:
            return self.init
        return Init.GAUSS_UNIT if self.game == "tandem" else Init.GAUSS

    @property
    def resolved_sigma(self) -> float:
        if self.sigma is not None:
            return self.sigma
        return 1.0 if self.resolved_init is Init.GAUSS_UNIT else 0.1

    def make_game(self):
        if self.game == "custom":
            return games_mod.custom(self.payoffs)
        return games_mod.get(self.game)


def run_rng(seed: int, run_index: int, key: Sequence[int] = ()) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key), int(run_index)]))


def initial_params(cfg: ExperimentConfig, n_params: int, run_indices: Sequence[int],
                   key: Sequence[int] = (), mirrored: bool = False):
    """Initial ``(theta_a, theta_b)``, each of shape ``(n_params, n_runs)``."""
    init, sigma = cfg.resolved_init, cfg.resolved_sigma
    base = np.array(EGFB_THETA) if init is Init.EGFB else np.zeros(n_params)
    first, second = [], []
    for r in run_indices:
        rng = run_rng(cfg.seed, r, key)
        first.append(base + sigma * rng.standard_normal(n_params))
        second.append(base + sigma * rng.standard_normal(n_params))
    theta_a, theta_b = np.array(first).T, np.array(second).T
    if mirrored:
        theta_a, theta_b = theta_b, theta_a
    return theta_a, theta_b


@dataclass
class BatchRecord:
    """Trajectories of several runs; time is the leading axis, runs the last.

    ``theta_*``: (T, n, R); ``payoff_*``: (T, R); ``probs_*``: (T, 4, R) for
    matrix games; ``outcomes``: (T, 4, R) ordered CC, CD, DC, DD;
    ``sos_p_*`` and ``sos_inner_*``: (T, R), SOS scaling factor and
    ``<xi_SOS, xi_LA>`` (NaN for non-SOS learners).  ``T = steps + 1``.
    """

    run_indices: np.ndarray
    theta_a: np.ndarray
    theta_b: np.ndarray
    payoff_a: np.ndarray
    payoff_b: np.ndarray
    sos_p_a: np.ndarray
    sos_p_b: np.ndarray
    sos_inner_a: np.ndarray
    sos_inner_b: np.ndarray
    diverged_step: np.ndarray  # -1 for runs that never diverged
    probs_a: np.ndarray | None = None
    probs_b: np.ndarray | None = None
    outcomes: np.ndarray | None = None

    @property
    def n_runs(self) -> int:
        return len(self.run_indices)

    @property
    def diverged(self) -> np.ndarray:
        return self.diverged_step >= 0

    def run(self, i: int) -> "RunRecord":
        def pick(x):
            return None if x is None else x[..., i]

        return RunRecord(
            run_index=int(self.run_indices[i]),
            theta_a=pick(self.theta_a),
            theta_b=pick(self.theta_b),
            payoff_a=pick(self.payoff_a),
            payoff_b=pick(self.payoff_b),
            sos_p_a=pick(self.sos_p_a),
            sos_p_b=pick(self.sos_p_b),
            probs_a=pick(self.probs_a),
            probs_b=pick(self.probs_b),
            outcomes=pick(self.outcomes),
            diverged_step=int(self.diverged_step[i]),
        )


@dataclass
class RunRecord:
    run_index: int
    theta_a: np.ndarray
    theta_b: np.ndarray
    payoff_a: np.ndarray
    payoff_b: np.ndarray
    sos_p_a: np.ndarray
    sos_p_b: np.ndarray
    probs_a: np.ndarray | None
    probs_b: np.ndarray | None
    outcomes: np.ndarray | None
    diverged_step: int

    @property
    def diverged(self) -> bool:
        return self.diverged_step >= 0

    def __len__(self) -> int:
        return self.payoff_a.shape[0]


def _sos_stats(spec: L.LearnerSpec, rep: L.GradientReport, n_runs: int):
    if spec.kind is not L.Kind.SOS:
        nan = np.full(n_runs, np.nan)
        return nan, nan
    return rep.p, np.sum(rep.final * rep.look_ahead, axis=0)


def simulate(game, spec_a: L.LearnerSpec, spec_b: L.LearnerSpec, theta_a, theta_b,
             steps: int, run_indices=None) -> BatchRecord:
    """Run ``steps`` simultaneous updates from the given initial parameters.

    Runs whose parameters leave ``[-1e6, 1e6]`` (or become non-finite) are
    frozen at their last valid state and flagged in ``diverged_step``.
    """
    theta_a = np.array(theta_a, dtype=float)
    theta_b = np.array(theta_b, dtype=float)
    n_runs = theta_a.shape[1]
    if run_indices is None:
        run_indices = np.arange(n_runs)
    matrix = isinstance(game, games_mod.MatrixGame2x2)
    T = steps + 1

    hist_a = np.empty((T,) + theta_a.shape)
    hist_b = np.empty((T,) + theta_b.shape)
    sos = {k: np.empty((T, n_runs)) for k in ("p_a", "p_b", "in_a", "in_b")}
    diverged_step = np.full(n_runs, -1)
    alive = np.ones(n_runs, dtype=bool)

    for t in range(T):
        hist_a[t], hist_b[t] = theta_a, theta_b
        new_a, new_b, rep_a, rep_b = L.update_step(spec_a, spec_b, theta_a, theta_b, game)
        sos["p_a"][t], sos["in_a"][t] = _sos_stats(spec_a, rep_a, n_runs)
        sos["p_b"][t], sos["in_b"][t] = _sos_stats(spec_b, rep_b, n_runs)
        if t == steps:
            break
        ok = (
            np.all(np.isfinite(new_a), axis=0)
            & np.all(np.isfinite(new_b), axis=0)
            & np.all(np.abs(new_a) <= DIVERGENCE_BOUND, axis=0)
            & np.all(np.abs(new_b) <= DIVERGENCE_BOUND, axis=0)
        )
        newly = alive & ~ok
        diverged_step[newly] = t + 1
        alive &= ok
        theta_a = np.where(alive, new_a, theta_a)
        theta_b = np.where(alive, new_b, theta_b)

    flat_a = [hist_a[:, i] for i in range(hist_a.shape[1])]
    flat_b = [hist_b[:, i] for i in range(hist_b.shape[1])]
    payoff_a, payoff_b = game.payoffs(flat_a, flat_b)
    record = BatchRecord(
        run_indices=np.asarray(run_indices),
        theta_a=hist_a,
        theta_b=hist_b,
        payoff_a=np.asarray(payoff_a),
        payoff_b=np.asarray(payoff_b),
        sos_p_a=sos["p_a"],
        sos_p_b=sos["p_b"],
        sos_inner_a=sos["in_a"],
        sos_inner_b=sos["in_b"],
        diverged_step=diverged_step,
    )
    if matrix:
        record.probs_a = np.moveaxis(valuefn.policy_probabilities(flat_a), 0, 1)
        record.probs_b = np.moveaxis(valuefn.policy_probabilities(flat_b), 0, 1)
        record.outcomes = np.moveaxis(valuefn.outcome_probabilities(flat_a, flat_b), 0, 1)
    return record


def run_batch(cfg: ExperimentConfig, run_indices: Sequence[int] | None = None,
              key: Sequence[int] = (), mirrored: bool = False) -> BatchRecord:
    if run_indices is None:
        run_indices = range(cfg.n_sample)
    run_indices = np.asarray(list(run_indices))
    game = cfg.make_game()
    theta_a, theta_b = initial_params(cfg, game.n_params, run_indices, key, mirrored)
    return simulate(game, cfg.spec_a, cfg.spec_b, theta_a, theta_b, cfg.steps, run_indices)


def run_training(cfg: ExperimentConfig, run_index: int) -> RunRecord:
    return run_batch(cfg, [run_index]).run(0)


# -- aggregation --------------------------------------------------------------------


def mean_std(x: np.ndarray, axis: int = -1):
    """Mean and sample standard deviation (0 when there is a single sample)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    mean = np.mean(x, axis=axis)
    std = np.std(x, axis=axis, ddof=1) if n > 1 else np.zeros_like(mean)
    return mean, std


def standard_error(std, n: int):
    """Error bar used throughout: two sample standard deviations over sqrt(n)."""
    return 2.0 * np.asarray(std) / math.sqrt(n)


@dataclass
class SweepSummary:
    values: list  # swept eta values
    rows: list  # one dict per value: {"eta", "<metric>_mean", "<metric>_std", "<metric>_se", "runs", "diverged"}

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])


SWEEP_METRICS = ("p_cc", "p_cd", "p_dc", "p_dd", "payoff_a", "payoff_b")


def summarize_final(record: BatchRecord) -> dict:
    n = record.n_runs
    out = {}
    metrics = {"payoff_a": record.payoff_a[-1], "payoff_b": record.payoff_b[-1]}
    if record.outcomes is not None:
        for k, name in enumerate(SWEEP_METRICS[:4]):
            metrics[name] = record.outcomes[-1, k]
    for name, values in metrics.items():
        mean, std = mean_std(values)
        out[f"{name}_mean"] = float(mean)
        out[f"{name}_std"] = float(std)
        out[f"{name}_se"] = float(standard_error(std, n))
    out["runs"] = n
    out["diverged"] = int(record.diverged.sum())
    return out


def eta_sweep(cfg: ExperimentConfig, etas: Sequence[float] = ETA_GRID) -> SweepSummary:
    """Final outcome statistics as both players' eta is varied together."""
    rows = []
    for eta in etas:
        if not eta > 0:
            raise ValueError("swept eta values must be positive")
        c = replace(cfg, spec_a=replace(cfg.spec_a, eta=eta), spec_b=replace(cfg.spec_b, eta=eta))
        rows.append({"eta": float(eta), **summarize_final(run_batch(c))})
    return SweepSummary(list(map(float, etas)), rows)


@dataclass
class Fluctuations:
    mean_a: np.ndarray
    std_a: np.ndarray
    mean_b: np.ndarray
    std_b: np.ndarray


def fluctuation_stats(cfg: ExperimentConfig, record: BatchRecord | None = None) -> Fluctuations:
    """Per-step mean and sample std of both players' expected payoffs across runs."""
    record = record if record is not None else run_batch(cfg)
    mean_a, std_a = mean_std(record.payoff_a)
    mean_b, std_b = mean_std(record.payoff_b)
    return Fluctuations(mean_a, std_a, mean_b, std_b)


def role_split(payoff_a: np.ndarray, payoff_b: np.ndarray) -> np.ndarray:
    """True where A takes the higher-payoff role; exact ties go to A."""
    return payoff_a >= payoff_b


def final_params_summary(cfg: ExperimentConfig, record: BatchRecord | None = None,
                         step: int = -1) -> dict:
    """Per-role mean and std of the four policy probabilities at ``step``.

    Each run's two agents are split into the higher- and lower-payoff role
    (by expected payoff at ``step``) before aggregating.
    """
    if not cfg.is_matrix_game:
        raise ValueError("final parameter summary needs a transparent 2x2 game")
    record = record if record is not None else run_batch(cfg)
    a_high = role_split(record.payoff_a[step], record.payoff_b[step])
    probs_hi = np.where(a_high, record.probs_a[step], record.probs_b[step])
    probs_lo = np.where(a_high, record.probs_b[step], record.probs_a[step])
    pay_hi = np.where(a_high, record.payoff_a[step], record.payoff_b[step])
    pay_lo = np.where(a_high, record.payoff_b[step], record.payoff_a[step])
    out = {}
    for role, probs, pay in (("higher", probs_hi, pay_hi), ("lower", probs_lo, pay_lo)):
        entry = {}
        for k, name in enumerate(valuefn.PARAM_NAMES):
            mean, std = mean_std(probs[k])
            entry[f"Pr[{name}]"] = {"mean": float(mean), "std": float(std)}
        mean, std = mean_std(pay)
        entry["payoff"] = {"mean": float(mean), "std": float(std)}
        out[role] = entry
    out["runs"] = record.n_runs
    out["diverged"] = int(record.diverged.sum())
    return out


# -- gradient fields -------------------------------------------------------------------


@dataclass
class GradientField:
    p_a: np.ndarray  # (res, res) probability of player A (p_fair for ultimatum)
    p_b: np.ndarray
    grad_a: np.ndarray  # parameter-space gradients
    grad_b: np.ndarray
    dp_a: np.ndarray  # the same gradients mapped to probability space
    dp_b: np.ndarray


def _logit(p):
    return np.log(p) - np.log1p(-p)


def gradient_field(kind: L.Kind | str = L.Kind.NAIVE, eta: float = 1.0, resolution: int = 21,
                   game: str = "ultimatum", lo: float = 0.02, hi: float = 0.98,
                   a: float = 0.5, b: float = 0.1) -> GradientField:
    """Both players' learning gradients on a uniform probability grid.

    Axis 0 indexes player A's probability, axis 1 player B's.  Grid points
    are mapped through the logit to parameters before differentiating.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    g = games_mod.get(game)
    if g.n_params != 1:
        raise ValueError("gradient fields are defined for one-parameter games")
    ticks = np.linspace(lo, hi, resolution)
    p_a, p_b = np.meshgrid(ticks, ticks, indexing="ij")
    theta_a = _logit(p_a.ravel())[None, :]
    theta_b = _logit(p_b.ravel())[None, :]
    spec = L.LearnerSpec(kind, delta=1.0, eta=eta, a=a, b=b)
    _, _, rep_a, rep_b = L.update_step(spec, spec, theta_a, theta_b, g)
    grad_a = rep_a.final[0].reshape(p_a.shape)
    grad_b = rep_b.final[0].reshape(p_b.shape)
    jac_a = p_a * (1 - p_a)
    jac_b = p_b * (1 - p_b)
    return GradientField(p_a, p_b, grad_a, grad_b, jac_a * grad_a, jac_b * grad_b)


# -- tandem ---------------------------------------------------------------------------------


@dataclass
class TandemResult:
    kind_a: str
    kind_b: str
    mean_a: np.ndarray  # per-step mean reward
    std_a: np.ndarray
    mean_b: np.ndarray
    std_b: np.ndarray
    final_sum: np.ndarray  # x + y per run at the last step
    record: BatchRecord


TANDEM_PAIRS = (("lola", "lola"), ("sos", "sos"), ("lola", "sos"), ("sos", "lola"))


def tandem_experiment(pairs: Sequence[tuple] = TANDEM_PAIRS, delta: float = 0.1, eta: float = 0.1,
                      steps: int = 1000, n_sample: int = 100, seed: int = 0) -> list[TandemResult]:
    out = []
    for ka, kb in pairs:
        cfg = ExperimentConfig(
            game="tandem",
            spec_a=L.LearnerSpec(ka, delta=delta, eta=eta),
            spec_b=L.LearnerSpec(kb, delta=delta, eta=eta),
            steps=steps,
            n_sample=n_sample,
            seed=seed,
        )
        rec = run_batch(cfg)
        f = fluctuation_stats(cfg, rec)
        final_sum = rec.theta_a[-1, 0] + rec.theta_b[-1, 0]
        out.append(TandemResult(L.Kind(ka).value, L.Kind(kb).value, f.mean_a, f.std_a,
                                f.mean_b, f.std_b, final_sum, rec))
    return out


def probability_of_cooperation(record: BatchRecord, step: int = -1):
    """Marginal cooperation probabilities ``(w_A[C], w_B[C])`` at ``step``."""
    out = record.outcomes[step]
    return out[0] + out[1], out[0] + out[2]

