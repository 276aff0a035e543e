"""Command-line entry point: ``lolasim <command> [flags]``.

Settings are resolved in three layers: built-in defaults, then an optional
YAML/JSON file (``--config``), then command-line flags.  Every command
validates the resolved settings before doing any work and writes its files,
together with ``manifest.json``, only after all computation has finished.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from lolasim import __version__
from lolasim import experiments as E
from lolasim import games as games_mod
from lolasim import learners as L
from lolasim import tournament as T
from lolasim import valuefn

COMMANDS = ("train", "sweep-eta", "tournament", "gradient-field", "tandem", "final-params")
GAME_CHOICES = ("pd", "chicken", "ultimatum", "tandem", "custom")
KIND_CHOICES = tuple(k.value for k in L.Kind)

DEFAULTS = {
    "game": "pd",
    "learner_a": "naive",
    "learner_b": "naive",
    "eta_a": 1.0,
    "eta_b": 1.0,
    "delta_a": 1.0,
    "delta_b": 1.0,
    "steps": 1000,
    "runs": 100,
    "seed": 0,
    "init": None,  # gauss (tandem: unit gaussian)
    "sigma": None,  # 0.1 (tandem: 1.0)
    "a": 0.5,
    "b": 0.1,
    "etas": list(E.ETA_GRID),
    "resolution": 21,
    "payoffs": None,
    "roster": None,
    "pairs": [list(p) for p in E.TANDEM_PAIRS],
    "workers": None,
    "out": "lolasim-out",
    "format": None,
}

# command-specific defaults that differ from the table above
COMMAND_DEFAULTS = {
    "tandem": {"game": "tandem", "eta_a": 0.1, "eta_b": 0.1, "delta_a": 0.1, "delta_b": 0.1},
    "gradient-field": {"game": "ultimatum"},
}

DEFAULT_FORMAT = {"tournament": "json", "final-params": "json"}
MANIFEST_KEYS = {"artifact", "version", "command", "outputs", "config"}


class UsageError(Exception):
    pass


# -- configuration --------------------------------------------------------------------


def _flatten(raw: dict) -> dict:
    """Map the nested file layout onto the flat settings keys."""
    out = {}
    for key, value in raw.items():
        key = str(key).replace("-", "_")
        if key in ("learner_a", "learner_b") and isinstance(value, dict):
            seat = key[-1]
            extra = set(value) - {"kind", "eta", "delta"}
            if extra:
                raise UsageError(f"unknown keys in {key}: {sorted(extra)}")
            if "kind" in value:
                out[key] = value["kind"]
            for name in ("eta", "delta"):
                if name in value:
                    out[f"{name}_{seat}"] = value[name]
        elif key == "sos" and isinstance(value, dict):
            extra = set(value) - {"a", "b"}
            if extra:
                raise UsageError(f"unknown keys in sos: {sorted(extra)}")
            out.update(value)
        else:
            out[key] = value
    unknown = set(out) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown configuration keys: {sorted(unknown)}")
    return out


def load_config(path: str | Path, command: str) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a mapping")
    if set(raw) <= MANIFEST_KEYS and "config" in raw:  # re-run from a manifest
        if raw.get("command", command) != command:
            raise UsageError(f"manifest was written by {raw['command']!r}, not {command!r}")
        raw = raw["config"]
    return _flatten(raw)


def resolve(command: str, args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    settings.update(COMMAND_DEFAULTS.get(command, {}))
    if args.config:
        settings.update(load_config(args.config, command))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["format"] is None:
        settings["format"] = DEFAULT_FORMAT.get(command, "csv")
    if command == "tandem" and settings["game"] != "tandem":
        raise UsageError("the tandem command only runs the tandem game")
    return settings


def _spec(settings: dict, seat: str) -> L.LearnerSpec:
    return L.LearnerSpec(settings[f"learner_{seat}"], delta=float(settings[f"delta_{seat}"]),
                         eta=float(settings[f"eta_{seat}"]), a=float(settings["a"]),
                         b=float(settings["b"]))


def experiment_config(settings: dict) -> E.ExperimentConfig:
    payoffs = settings["payoffs"]
    if settings["game"] == "custom" and payoffs is not None:
        games_mod.custom(payoffs)  # validates the table
        payoffs = tuple(tuple(tuple(float(x) for x in pair) for pair in row) for row in payoffs)
    return E.ExperimentConfig(
        game=settings["game"],
        spec_a=_spec(settings, "a"),
        spec_b=_spec(settings, "b"),
        steps=int(settings["steps"]),
        n_sample=int(settings["runs"]),
        init=settings["init"],
        sigma=None if settings["sigma"] is None else float(settings["sigma"]),
        seed=int(settings["seed"]),
        payoffs=payoffs,
    )


def roster(settings: dict) -> list[T.Entry]:
    if settings["roster"] is None:
        return T.default_roster(delta=float(settings["delta_a"]))
    entries = []
    for item in settings["roster"]:
        if not isinstance(item, dict) or set(item) - {"name", "kind", "eta", "delta"}:
            raise UsageError("roster entries take keys name, kind, eta, delta")
        spec = L.LearnerSpec(item.get("kind", "naive"), delta=float(item.get("delta", 1.0)),
                             eta=float(item.get("eta", 1.0)), a=float(settings["a"]),
                             b=float(settings["b"]))
        entries.append(T.Entry(str(item.get("name", f"{spec.kind.value} eta={spec.eta:g}")), spec))
    T.validate_roster(entries)
    return entries


# -- serialization --------------------------------------------------------------------


def fmt(x) -> str:
    """9 significant digits, locale independent."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".9g")


def csv_text(columns: dict) -> str:
    names = list(columns)
    n = len(next(iter(columns.values())))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(n):
        w.writerow([fmt(columns[c][i]) for c in names])
    return buf.getvalue()


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def json_text(obj) -> str:
    return json.dumps(_plain(obj), indent=2) + "\n"


def table(columns: dict, fmt_name: str) -> tuple[str, str]:
    """Serialized table and file suffix for the chosen output format."""
    if fmt_name == "csv":
        return csv_text(columns), ".csv"
    return json_text(columns), ".json"


# -- commands -------------------------------------------------------------------------


def _trajectory(rec: E.BatchRecord) -> dict:
    cols = {"step": np.arange(rec.payoff_a.shape[0])}
    for seat, pay in (("a", rec.payoff_a), ("b", rec.payoff_b)):
        mean, std = E.mean_std(pay)
        cols[f"payoff_{seat}_mean"], cols[f"payoff_{seat}_std"] = mean, std
    if rec.outcomes is not None:
        for k, name in enumerate(E.SWEEP_METRICS[:4]):
            cols[f"{name}_mean"] = rec.outcomes[:, k].mean(axis=-1)
        for seat, probs in (("a", rec.probs_a), ("b", rec.probs_b)):
            for k, name in enumerate(valuefn.PARAM_NAMES):
                cols[f"{seat}_pr_{name}_mean"] = probs[:, k].mean(axis=-1)
    else:
        for seat, theta in (("a", rec.theta_a), ("b", rec.theta_b)):
            for k in range(theta.shape[1]):
                cols[f"theta_{seat}{k}_mean"] = theta[:, k].mean(axis=-1)
    for seat, p in (("a", rec.sos_p_a), ("b", rec.sos_p_b)):
        if not np.isnan(p).all():
            cols[f"sos_p_{seat}_mean"] = p.mean(axis=-1)
    return cols


def _final_runs(rec: E.BatchRecord) -> dict:
    cols = {"run": rec.run_indices, "diverged_step": rec.diverged_step,
            "payoff_a": rec.payoff_a[-1], "payoff_b": rec.payoff_b[-1]}
    for seat, theta in (("a", rec.theta_a), ("b", rec.theta_b)):
        for k in range(theta.shape[1]):
            cols[f"theta_{seat}{k}"] = theta[-1, k]
    if rec.outcomes is not None:
        for k, name in enumerate(E.SWEEP_METRICS[:4]):
            cols[name] = rec.outcomes[-1, k]
    return cols


def _stats(x) -> dict:
    mean, std = E.mean_std(x)
    return {"mean": float(mean), "std": float(std), "min": float(np.min(x)), "max": float(np.max(x))}


def cmd_train(settings: dict) -> dict:
    cfg = experiment_config(settings)
    rec = E.run_batch(cfg)
    summary = E.summarize_final(rec)
    if rec.theta_a.shape[1] == 1:
        summary["theta_sum"] = _stats(rec.theta_a[-1, 0] + rec.theta_b[-1, 0])
    if rec.probs_a is not None:
        summary["pr_s_initial"] = {s: float(p[0, 0].mean()) for s, p in (("a", rec.probs_a), ("b", rec.probs_b))}
        summary["pr_s_final"] = {s: float(p[-1, 0].mean()) for s, p in (("a", rec.probs_a), ("b", rec.probs_b))}
    sos = T.sos_extremes(rec)
    if not math.isnan(sos[0]):
        summary["sos"] = {"min_inner": sos[0], "min_p": sos[1], "max_p": sos[2]}
    fmt_name = settings["format"]
    traj, ext = table(_trajectory(rec), fmt_name)
    runs, _ = table(_final_runs(rec), fmt_name)
    return {f"trajectory{ext}": traj, f"runs{ext}": runs, "summary.json": json_text(summary)}


def cmd_sweep(settings: dict) -> dict:
    cfg = experiment_config(settings)
    etas = [float(e) for e in settings["etas"]]
    if not etas or not all(e > 0 for e in etas):
        raise UsageError("swept eta values must be positive")
    sweep = E.eta_sweep(cfg, etas)
    cols = {"eta": sweep.column("eta")}
    metrics = E.SWEEP_METRICS if cfg.is_matrix_game else E.SWEEP_METRICS[4:]
    for m in metrics:
        for stat in ("mean", "se", "std"):
            cols[f"{m}_{stat}"] = sweep.column(f"{m}_{stat}")
    cols["runs"] = sweep.column("runs")
    cols["diverged"] = sweep.column("diverged")
    text, ext = table(cols, settings["format"])
    return {f"sweep{ext}": text}


def cmd_tournament(settings: dict) -> dict:
    entries = roster(settings)
    cfg = experiment_config(settings)  # validates game/steps/runs
    workers = None if settings["workers"] is None else int(settings["workers"])
    m = T.cross_play(entries, game=cfg.game, steps=cfg.steps, n_sample=cfg.n_sample,
                     seed=cfg.seed, workers=workers, payoffs=cfg.payoffs)
    if settings["format"] == "csv":
        cols = {k: [] for k in ("row", "column", "mean", "std", "err", "best_response", "diverged")}
        for i, r in enumerate(m.names):
            for j, c in enumerate(m.names):
                for key, val in zip(cols, (r, c, m.mean[i, j], m.std[i, j], m.err[i, j],
                                           m.flags[i, j], m.diverged[i, j])):
                    cols[key].append(val)
        return {"crossplay.csv": csv_text(cols)}
    doc = {
        "names": m.names,
        "mean": m.mean,
        "std": m.std,
        "err": m.err,
        "best_response": m.flags,
        "diverged": m.diverged,
        "n_sample": m.n_sample,
        "mutual_best_responses": T.mutual_best_responses(m),
    }
    return {"crossplay.json": json_text(doc)}


def cmd_gradient_field(settings: dict) -> dict:
    res = int(settings["resolution"])
    spec = _spec(settings, "a")
    f = E.gradient_field(spec.kind, spec.eta, res, game=settings["game"], a=spec.a, b=spec.b)
    cols = {name: getattr(f, name).ravel() for name in ("p_a", "p_b", "grad_a", "grad_b", "dp_a", "dp_b")}
    text, ext = table(cols, settings["format"])
    return {f"field{ext}": text}


def _pairs(settings: dict) -> list[tuple[str, str]]:
    out = []
    for p in settings["pairs"]:
        if isinstance(p, str):
            p = p.split(":")
        if len(p) != 2:
            raise UsageError(f"tandem pairs look like 'lola:sos', got {p!r}")
        out.append((L.Kind(p[0]).value, L.Kind(p[1]).value))
    return out


def cmd_tandem(settings: dict) -> dict:
    pairs = _pairs(settings)
    cfg = experiment_config(settings)
    if cfg.spec_a.delta != cfg.spec_b.delta or cfg.spec_a.eta != cfg.spec_b.eta:
        raise UsageError("tandem command uses one delta and one eta for both players")
    results = E.tandem_experiment(pairs, delta=cfg.spec_a.delta, eta=cfg.spec_a.eta,
                                  steps=cfg.steps, n_sample=cfg.n_sample, seed=cfg.seed)
    cols = {k: [] for k in ("pair", "step", "mean_a", "std_a", "mean_b", "std_b")}
    summary = {}
    for r in results:
        name = f"{r.kind_a}-vs-{r.kind_b}"
        for t in range(len(r.mean_a)):
            for key, val in zip(cols, (name, t, r.mean_a[t], r.std_a[t], r.mean_b[t], r.std_b[t])):
                cols[key].append(val)
        summary[name] = {
            "theta_sum": _stats(r.final_sum),
            "final_reward_a": float(r.mean_a[-1]),
            "final_reward_b": float(r.mean_b[-1]),
            "diverged": int(r.record.diverged.sum()),
        }
    text, ext = table(cols, settings["format"])
    return {f"tandem{ext}": text, "tandem_summary.json": json_text(summary)}


def cmd_final_params(settings: dict) -> dict:
    cfg = experiment_config(settings)
    if not cfg.is_matrix_game:
        raise UsageError("final-params needs a transparent 2x2 game")
    s = E.final_params_summary(cfg)
    if settings["format"] == "csv":
        cols = {"role": [], "quantity": [], "mean": [], "std": []}
        for role in ("higher", "lower"):
            for q, v in s[role].items():
                cols["role"].append(role)
                cols["quantity"].append(q)
                cols["mean"].append(v["mean"])
                cols["std"].append(v["std"])
        return {"final_params.csv": csv_text(cols)}
    return {"final_params.json": json_text(s)}


HANDLERS = {
    "train": cmd_train,
    "sweep-eta": cmd_sweep,
    "tournament": cmd_tournament,
    "gradient-field": cmd_gradient_field,
    "tandem": cmd_tandem,
    "final-params": cmd_final_params,
}


def validate(command: str, settings: dict) -> None:
    """Reject bad settings before any computation."""
    if settings["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    if settings["game"] not in GAME_CHOICES:
        raise UsageError(f"unknown game {settings['game']!r}")
    experiment_config(settings)
    if command == "tournament":
        roster(settings)
    if command == "sweep-eta" and not all(float(e) > 0 for e in settings["etas"]):
        raise UsageError("swept eta values must be positive")
    if command == "gradient-field":
        if int(settings["resolution"]) < 2:
            raise UsageError("resolution must be at least 2")
        if settings["game"] not in ("ultimatum", "tandem"):
            raise UsageError("gradient fields need a one-parameter game (ultimatum or tandem)")
    if command == "final-params" and settings["game"] in ("ultimatum", "tandem"):
        raise UsageError("final-params needs a transparent 2x2 game")
    if command == "tandem":
        _pairs(settings)


def manifest(command: str, settings: dict, outputs: list[str]) -> str:
    config = {k: v for k, v in settings.items() if k not in ("out", "workers")}
    return json_text({
        "artifact": "lolasim",
        "version": __version__,
        "command": command,
        "config": config,
        "outputs": sorted(outputs),
    })


def run(command: str, settings: dict) -> dict:
    """Validate, compute and return ``{file name: text}`` including the manifest."""
    validate(command, settings)
    cfg = experiment_config(settings)
    settings = {**settings, "init": cfg.resolved_init.value, "sigma": cfg.resolved_sigma}
    files = HANDLERS[command](settings)
    files["manifest.json"] = manifest(command, settings, list(files))
    return files


def write(files: dict, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8", newline="\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lolasim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML/JSON settings file (or a previous manifest.json)")
        p.add_argument("--game", choices=GAME_CHOICES)
        p.add_argument("--learner-a", dest="learner_a", choices=KIND_CHOICES)
        p.add_argument("--learner-b", dest="learner_b", choices=KIND_CHOICES)
        for flag in ("eta-a", "eta-b", "delta-a", "delta-b", "sigma"):
            p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), type=float)
        p.add_argument("--sos-a", dest="a", type=float, help="SOS look-ahead tolerance a")
        p.add_argument("--sos-b", dest="b", type=float, help="SOS convergence threshold b")
        p.add_argument("--steps", type=int)
        p.add_argument("--runs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--init", choices=[i.value for i in E.Init])
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"))
        if name == "sweep-eta":
            p.add_argument("--etas", type=float, nargs="+")
        if name == "gradient-field":
            p.add_argument("--resolution", type=int)
        if name == "tandem":
            p.add_argument("--pairs", nargs="+", help="learner pairs such as lola:sos")
        if name == "tournament":
            p.add_argument("--workers", type=int, help=f"process count (default ${T.WORKERS_ENV} or all cores)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args.command, args)
        files = run(args.command, settings)
    except (UsageError, ValueError) as exc:
        print(f"lolasim: error: {exc}", file=sys.stderr)
        return 2
    write(files, settings["out"])
    print("\n".join(str(Path(settings["out"]) / n) for n in sorted(files)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
