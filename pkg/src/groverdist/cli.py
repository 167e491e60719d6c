"""Command-line front end: ``encode``, ``count``, ``train`` and ``sweep``.

Each run writes into ``--out``:

* ``metrics.csv``  comma-separated, header row, floats at 12 significant digits;
* ``record.json``  run id, config echo, summary metrics and a timestamp;
* a PNG figure named after the command.

Metric files depend only on the config and seed.  Exit codes: 0 ok,
2 configuration or validation error, 3 encoder error, 4 resource budget.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import plotting
from .config import COMMANDS, ExperimentConfig, load_config
from .counting import CountingConfig, count
from .encoder import (
    TargetDistribution,
    class_error_report,
    encode,
    random_reachable_targets,
    validate_targets,
)
from .envs import GridWorld, KArmedBandit, optimal_actions, value_iteration
from .errors import (
    BudgetError,
    ExhaustedBranchError,
    GroverDistError,
    InconsistentCountsError,
    InfeasibleTargetError,
    OvershootError,
)
from .planner import precision_bound
from .qlearn import PolicyConfig, TrainingConfig, greedy_policy, train

EXIT_OK, EXIT_CONFIG, EXIT_ENCODER, EXIT_BUDGET = 0, 2, 3, 4
_ENCODER_ERRORS = (InfeasibleTargetError, OvershootError, ExhaustedBranchError, InconsistentCountsError)


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    _write_atomic(path, buf.getvalue().encode())


def write_record(out: Path, cfg: ExperimentConfig, summary: dict) -> None:
    record = {
        "run_id": cfg.run_id(),
        "command": cfg.command,
        "seed": cfg.seed,
        "config": cfg.to_text(),
        "summary": summary,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _write_atomic(out / "record.json", (json.dumps(record, indent=2, sort_keys=True, default=_json) + "\n").encode())


def _json(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def cmd_encode(cfg: ExperimentConfig, out: Path) -> dict:
    sec = cfg["encode"]
    dist = TargetDistribution.build(sec["n_values"], sec["classes"], sec["targets"])
    try:
        validate_targets(dist, sec["remainder"])
    except InfeasibleTargetError:
        if sec["strict"]:
            raise
    enc = encode(dist, remainder=sec["remainder"], strict=sec["strict"])
    rows = class_error_report(enc)
    write_csv(out / "metrics.csv", rows, ["class_id", "size", "role", "target", "achieved", "abs_error", "t_f"])
    steps = [
        {
            "step": i + 1,
            "class_id": j + 1,
            "r": st.r,
            "t_f": st.t_f,
            "branch_weight": st.b,
            "per_state_target": st.target_per_state_probability,
            "per_state_achieved": st.achieved_per_state_probability,
            "feasible": st.feasible,
        }
        for i, (j, st) in enumerate(zip(enc.order, enc.plan.steps))
    ]
    write_csv(
        out / "plan.csv",
        steps,
        ["step", "class_id", "r", "t_f", "branch_weight", "per_state_target", "per_state_achieved", "feasible"],
    )
    plotting.plot_encoding(rows, out / "encode.png")
    return {
        "n_values": dist.n_values,
        "n_classes": dist.n_classes,
        "total_grover_iterations": enc.total_grover_iterations,
        "max_class_error": enc.max_class_error,
        "remainder_class": enc.remainder + 1,
    }


def cmd_count(cfg: ExperimentConfig, out: Path) -> dict:
    sec = cfg["count"]
    n = sec["n_values"]
    conf = CountingConfig(sec["precision_bits"], sec["mode"], sec["backend"])
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for j, members in enumerate(sec["classes"]):
        est = count(n, list(members), conf, rng)
        rows.append(
            {
                "class_id": j + 1,
                "true_size": len(members),
                "estimate": est.estimate,
                "estimate_real": est.estimate_real,
                "raw_outcome": est.raw_outcome,
                "phase": est.phase,
                "error_bound": est.error_bound,
                "precision_bits": est.precision_bits,
                "oracle_calls": est.oracle_calls,
            }
        )
    write_csv(out / "metrics.csv", rows, list(rows[0]) if rows else ["class_id"])
    if rows:
        plotting.plot_counting(rows, out / "count.png")
    return {
        "n_values": n,
        "precision_bits": conf.bits_for(n),
        "max_abs_error": max((abs(r["estimate"] - r["true_size"]) for r in rows), default=0),
    }


def build_environment(cfg: ExperimentConfig):
    sec = cfg["env"]
    if sec["kind"] == "bandit":
        env_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
        return KArmedBandit.dominant(sec["n_arms"], env_rng, gap=sec["gap"], noise=sec["noise"])
    kwargs = dict(
        step_reward=sec["step_reward"], goal_reward=sec["goal_reward"], exploring_starts=sec["exploring_starts"]
    )
    if sec["layout"]:
        return GridWorld.from_file(sec["layout"], **kwargs)
    return GridWorld(sec["width"], sec["height"], **kwargs)


def policy_config(cfg: ExperimentConfig) -> PolicyConfig:
    p = cfg["policy"]
    return PolicyConfig(
        n_intervals=p["n_intervals"],
        t0=p["t0"],
        t_min=p["t_min"],
        selector=p["selector"],
        counting=CountingConfig(p["counting_bits"], p["counting_mode"], p["counting_backend"]),
        weighting=p["weighting"],
        remainder=p["remainder"],
    )


def training_config(cfg: ExperimentConfig) -> TrainingConfig:
    t = cfg["train"]
    return TrainingConfig(
        learning_rate=t["learning_rate"],
        discount=t["discount"],
        episodes=t["episodes"],
        max_steps=t["max_steps"],
        seed=cfg.seed,
        initial_q=t["initial_q"],
    )


def evaluate_greedy(env, q, discount: float) -> dict:
    """Compare the greedy policy of ``q`` with the optimal one."""
    policy = greedy_policy(q, env)
    if isinstance(env, KArmedBandit):
        return {"greedy_arm": policy[0], "best_arm": env.best_arm, "greedy_optimal": policy[0] == env.best_arm}
    q_star = value_iteration(env, discount)
    hits = [policy[s] in optimal_actions(q_star, s) for s in policy]
    return {
        "greedy_optimal": all(hits),
        "optimal_state_fraction": float(np.mean(hits)) if hits else 1.0,
        "policy": env.render_policy(policy),
    }


COUNTER_COLUMNS = [
    "decisions",
    "j_calls",
    "grover_iterations",
    "counting_invocations",
    "counting_oracle_calls",
    "q_calls",
    "minmax_scan_calls",
    "infeasible_steps",
    "count_retries",
]


def cmd_train(cfg: ExperimentConfig, out: Path) -> dict:
    env = build_environment(cfg)
    tcfg = training_config(cfg)
    stats = train(env, policy_config(cfg), tcfg)
    rows = [
        {"episode": i, "return": ret, "length": length, **counts}
        for i, (ret, length, counts) in enumerate(
            zip(stats.episode_returns, stats.episode_lengths, stats.episode_counts)
        )
    ]
    write_csv(out / "metrics.csv", rows, ["episode", "return", "length", *COUNTER_COLUMNS])
    plotting.plot_training(stats.episode_returns, out / "train.png")
    return {"selector": cfg["policy"]["selector"], **stats.totals(), **evaluate_greedy(env, stats.q, tcfg.discount)}


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> dict:
    sec = cfg["sweep"]
    rows = []
    prev = None
    for n in sec["n_values"]:
        errors, iterations = [], []
        for k in range(sec["target_sets"]):
            # seeded per set, not per N, so every N sees the same distribution shapes
            rng = np.random.default_rng([cfg.seed, k])
            enc = encode(random_reachable_targets(n, sec["n_classes"], sec["class_size"], rng))
            errors.append(enc.max_class_error)
            iterations.append(enc.total_grover_iterations)
        median_its = float(np.median(iterations))
        rows.append(
            {
                "n_values": n,
                "mean_max_class_error": float(np.mean(errors)),
                "max_max_class_error": float(np.max(errors)),
                "precision_bound": precision_bound(n),
                "median_grover_iterations": median_its,
                "mean_grover_iterations": float(np.mean(iterations)),
                "iteration_growth": "" if prev is None or prev == 0 else median_its / prev,
            }
        )
        prev = median_its
    write_csv(out / "metrics.csv", rows, list(rows[0]) if rows else ["n_values"])
    if rows:
        plotting.plot_sweep(rows, out / "sweep.png")
    return {"points": len(rows)}


HANDLERS = {"encode": cmd_encode, "count": cmd_count, "train": cmd_train, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groverdist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--seed", type=int, help="overrides [run] seed")
        p.add_argument("--out", help="output directory; overrides [run] out")
        p.add_argument("--selector", choices=("quantum", "classical"), help="overrides [policy] selector")
    return parser


def run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(
            run__command=args.command, run__seed=args.seed, run__out=args.out, policy__selector=args.selector
        )
        out = Path(cfg["run"]["out"])
        out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[cfg.command](cfg, out)
        write_record(out, cfg, summary)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except _ENCODER_ERRORS as exc:
        print(f"encoder error: {exc}", file=sys.stderr)
        return EXIT_ENCODER
    except (GroverDistError, ValueError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{cfg.command}: wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    return run(build_parser().parse_args(argv))
