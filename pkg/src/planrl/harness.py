"""Experiment orchestration: config files, epoch loop, metrics, plots, CLI.

An experiment runs ``workers`` independent learners, each with a private
environment, replay buffer and parameter set.  Per epoch every worker
collects rollouts and runs gradient batches; at the epoch barrier all
parameter bundles are averaged and redistributed, then each worker
evaluates on fresh problem instances.  Workers execute sequentially inside
one process, which keeps the semantics of the barrier scheme while making
runs exactly reproducible.

Config files are flat ``key = value`` text; every hyperparameter of the
training protocol is exposed.  Metrics go to a CSV with one row per epoch.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .agent import SubgoalAgent, subgoal_progress
from .envs import NoiseModel, make_env
from .pddl import Planner, parse_domain, parse_domain_file, block_domain, \
    generate_ant_domain, tool_domain
from .rl import (DdpgLearner, LearnerConfig, ReplayBuffer, average_params,
                 her_relabel, save_checkpoint)


class ConfigError(Exception):
    pass


TASKS = ("blocks", "tool", "fourroom")


@dataclass
class ExperimentConfig:
    task: str = "blocks"
    n_objects: int = 1
    kappa: float = 0.0
    workers: int = 1                 # 0 selects min(cpu count, 15)
    epochs: int = 50
    rollouts_per_epoch: int = 100
    batches_per_epoch: int = 15
    batch_size: int = 256
    learning_rate: float = 0.01
    master_seed: int = 0
    early_stop_success: float = 0.95
    eval_episodes: int = 10
    out_dir: str = "runs/default"
    rollout_length: int = 0          # 0 keeps the task default
    gamma: float = 0.0               # 0 derives 1 - 1/T
    her_k: int = 4
    p_random: float = 0.2
    action_noise: float = 0.1
    polyak: float = 0.95
    buffer_episodes: int = 10000
    units_per_obs: int = 12
    epsilon: float = 0.0             # 0 keeps the env default
    block_height: float = 0.05
    node_budget: int = 100000
    use_planner: bool = True
    record_wall_clock: bool = True
    trace: bool = False
    domain_file: str = ""

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError("task must be one of %s" % (TASKS,))
        if self.task == "blocks" and self.n_objects not in (1, 2, 3):
            raise ConfigError("n_objects must be 1, 2 or 3")
        if self.kappa < 0:
            raise ConfigError("kappa must be >= 0")
        if not 0.0 <= self.early_stop_success <= 1.0:
            raise ConfigError("early_stop_success must be in [0, 1]")
        for name in ("epochs", "rollouts_per_epoch", "batches_per_epoch",
                     "batch_size", "eval_episodes", "buffer_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError("%s must be positive" % name)
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        if self.her_k < 0:
            raise ConfigError("her_k must be >= 0")

    def resolved_workers(self) -> int:
        if self.workers:
            return self.workers
        return max(1, min(os.cpu_count() or 1, 15))


def _parse_value(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError("expected a boolean, got '%s'" % raw)
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError("expected %s, got '%s'" % (kind.__name__, raw))


def load_config(path) -> ExperimentConfig:
    """Read a flat key = value config file (# starts a comment)."""
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    types = {"str": str, "int": int, "float": float, "bool": bool}
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("%s:%d: expected key = value" % (path, lineno))
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in kinds:
                raise ConfigError("%s:%d: unknown key '%s'" % (path, lineno, key))
            values[key] = _parse_value(raw, types[kinds[key]])
    config = ExperimentConfig(**values)
    config.validate()
    return config


def dump_config(config: ExperimentConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(ExperimentConfig):
            fh.write("%s = %s\n" % (f.name, getattr(config, f.name)))


def _domain_text(config: ExperimentConfig) -> str:
    if config.domain_file:
        with open(config.domain_file, "r", encoding="ascii") as fh:
            return fh.read()
    if config.task == "blocks":
        return block_domain(config.n_objects)
    if config.task == "tool":
        return tool_domain()
    return generate_ant_domain()


def build_env(config: ExperimentConfig):
    overrides = {}
    if config.rollout_length:
        overrides["rollout_length"] = config.rollout_length
    if config.epsilon:
        overrides["epsilon"] = config.epsilon
    if config.task == "blocks":
        overrides["block_height"] = config.block_height
    return make_env(config.task, config.n_objects, **overrides)


class Worker:
    """One learner with private env, noise history, buffer and RNG streams."""

    def __init__(self, config: ExperimentConfig, index: int,
                 seed_seq: np.random.SeedSequence):
        self.config = config
        self.index = index
        streams = seed_seq.spawn(4)
        self.rng = np.random.default_rng(streams[0])
        self.eval_rng = np.random.default_rng(streams[1])
        net_seed = int(streams[2].generate_state(1)[0])
        noise_seed = int(streams[3].generate_state(1)[0])
        self.env = build_env(config)
        self.noise = NoiseModel(config.kappa, seed=noise_seed)
        domain = parse_domain(_domain_text(config))
        self.planner = Planner(domain, node_budget=config.node_budget)
        T = self.env.rollout_length
        gamma = config.gamma if config.gamma else 1.0 - 1.0 / T
        self.learner = DdpgLearner(LearnerConfig(
            state_dim=self.env.state_dim, goal_dim=self.env.goal_dim,
            action_dim=self.env.action_dim, units_per_obs=config.units_per_obs,
            learning_rate=config.learning_rate, gamma=gamma,
            polyak=config.polyak), seed=net_seed)
        self.buffer = ReplayBuffer(config.buffer_episodes)
        self.agent = SubgoalAgent(self.env, self.planner, self.learner,
                                  self.noise, use_planner=config.use_planner,
                                  p_random=config.p_random,
                                  action_noise=config.action_noise)
        self.registry = self.env.registry()

    def train_epoch(self) -> dict:
        successes = 0
        for _ in range(self.config.rollouts_per_epoch):
            result = self.agent.run_episode(self.rng, mode="train")
            successes += bool(result.success)
            relabeled = []
            for segment in result.segments:
                relabeled.extend(her_relabel(
                    segment, self.config.her_k, self.registry.achieved_goal,
                    self.rng, self.env.goal_tolerance))
            self.buffer.push(result.transitions, relabeled)
        losses = []
        for _ in range(self.config.batches_per_epoch):
            stats = self.learner.train_batch(self.buffer,
                                             self.config.batch_size, self.rng)
            losses.append(stats["critic_loss"])
        return {"train_successes": successes,
                "train_episodes": self.config.rollouts_per_epoch,
                "critic_loss": float(np.mean(losses)) if losses else 0.0}

    def evaluate(self, episodes: int, trace_dir=None, epoch: int = 0) -> dict:
        results = []
        for i in range(episodes):
            collect = trace_dir is not None and i == 0
            result = self.agent.run_episode(self.eval_rng, mode="eval",
                                            collect_trace=collect)
            if collect and result.trace:
                _write_trace(result.trace, trace_dir, epoch, self.index)
            results.append(result)
        return {"eval_successes": sum(bool(r.success) for r in results),
                "eval_episodes": episodes,
                "mean_subgoals": subgoal_progress(results)}


def _write_trace(trace, trace_dir, epoch: int, worker: int):
    os.makedirs(trace_dir, exist_ok=True)
    path = os.path.join(trace_dir, "trace_epoch%03d_worker%d.csv"
                        % (epoch, worker))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "clean_state", "noisy_state", "action",
                         "reward"])
        for step, clean, noisy, action, reward in trace:
            writer.writerow([step,
                             " ".join("%.6f" % v for v in clean),
                             " ".join("%.6f" % v for v in noisy),
                             " ".join("%.6f" % v for v in action),
                             "%.1f" % reward])


CSV_COLUMNS = ("epoch", "train_success_rate", "eval_success_rate",
               "mean_subgoals", "critic_loss", "wall_clock")


def run_experiment(config: ExperimentConfig, worker_factory=Worker) -> str:
    """Run the full epoch loop; returns the metrics CSV path."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    dump_config(config, os.path.join(config.out_dir, "config.cfg"))
    n_workers = config.resolved_workers()
    seed_root = np.random.SeedSequence(config.master_seed)
    workers = [worker_factory(config, i, child)
               for i, child in enumerate(seed_root.spawn(n_workers))]
    metrics_path = os.path.join(config.out_dir, "metrics.csv")
    trace_dir = (os.path.join(config.out_dir, "traces")
                 if config.trace else None)
    start = time.monotonic()
    with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        fh.flush()
        for epoch in range(config.epochs):
            train_stats = [w.train_epoch() for w in workers]
            merged = average_params([w.learner.get_params() for w in workers])
            for w in workers:
                w.learner.set_params(merged)
            eval_stats = [w.evaluate(config.eval_episodes, trace_dir, epoch)
                          for w in workers]
            train_rate = (sum(s["train_successes"] for s in train_stats)
                          / sum(s["train_episodes"] for s in train_stats))
            eval_rate = (sum(s["eval_successes"] for s in eval_stats)
                         / sum(s["eval_episodes"] for s in eval_stats))
            mean_subgoals = float(np.mean([s["mean_subgoals"]
                                           for s in eval_stats]))
            critic_loss = float(np.mean([s["critic_loss"]
                                         for s in train_stats]))
            wall = time.monotonic() - start if config.record_wall_clock else 0.0
            writer.writerow(["%d" % epoch, "%.6f" % train_rate,
                             "%.6f" % eval_rate, "%.6f" % mean_subgoals,
                             "%.6f" % critic_loss, "%.3f" % wall])
            fh.flush()
            if eval_rate >= config.early_stop_success:
                break
    save_checkpoint(workers[0].learner.get_params(),
                    os.path.join(config.out_dir, "params.npz"))
    return metrics_path


# ---------------------------------------------------------------------------
# aggregation and plotting


def read_metrics(path) -> dict:
    """Metrics CSV as a dict of column name -> float array."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError("metrics file %s is empty" % path)
    return {col: np.asarray([float(r[col]) for r in rows])
            for col in reader.fieldnames}


AGGREGATE_METRICS = ("train_success_rate", "eval_success_rate",
                     "mean_subgoals", "critic_loss")


def aggregate_runs(paths) -> dict:
    """Per-epoch median and quartiles across repeated runs.

    Shorter runs (early-stopped) are padded by their final value so the
    epoch axes align.  Percentiles interpolate linearly between order
    statistics.
    """
    paths = list(paths)
    if not paths:
        raise ValueError("no metrics files to aggregate")
    runs = [read_metrics(p) for p in paths]
    n_epochs = max(len(r["epoch"]) for r in runs)
    out = {"epoch": np.arange(n_epochs, dtype=float)}
    for metric in AGGREGATE_METRICS:
        padded = np.stack([
            np.concatenate([r[metric],
                            np.full(n_epochs - len(r[metric]),
                                    r[metric][-1] if len(r[metric]) else 0.0)])
            for r in runs])
        out[metric + "_median"] = np.median(padded, axis=0)
        out[metric + "_q25"] = np.percentile(padded, 25, axis=0)
        out[metric + "_q75"] = np.percentile(padded, 75, axis=0)
    return out


def write_aggregate(aggregate: dict, path):
    columns = list(aggregate)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for i in range(len(aggregate["epoch"])):
            writer.writerow(["%.6f" % aggregate[c][i] for c in columns])


def read_aggregate(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError("aggregate file %s is empty" % path)
    return {col: np.asarray([float(r[col]) for r in rows])
            for col in reader.fieldnames}


def emit_plots(aggregates: dict, out_dir) -> list:
    """Success-rate figure (one quartile band per label) plus a subgoal
    figure; returns the written paths."""
    if not aggregates:
        raise ValueError("nothing to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, agg in aggregates.items():
        epochs = agg["epoch"]
        ax.plot(epochs, agg["eval_success_rate_median"], label=str(label))
        ax.fill_between(epochs, agg["eval_success_rate_q25"],
                        agg["eval_success_rate_q75"], alpha=0.25)
    ax.set_xlabel("epoch")
    ax.set_ylabel("eval success rate")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "success_rate.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    top = 6.0
    for label, agg in aggregates.items():
        epochs = agg["epoch"]
        ax.plot(epochs, agg["mean_subgoals_median"], label=str(label))
        ax.fill_between(epochs, agg["mean_subgoals_q25"],
                        agg["mean_subgoals_q75"], alpha=0.25)
        top = max(top, float(np.max(agg["mean_subgoals_q75"])))
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean subgoals achieved")
    ax.set_ylim(0.0, top * 1.05)
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "subgoals.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# CLI


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.master_seed = args.seed
        if args.workers is not None:
            config.workers = args.workers
        if args.trace:
            config.trace = True
        if args.domain:
            config.domain_file = args.domain
        config.validate()
    except (ConfigError, OSError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    try:
        path = run_experiment(config)
    except Exception as exc:  # noqa: BLE001 - surface as exit code 2
        print("run failed: %s" % exc, file=sys.stderr)
        return 2
    print(path)
    return 0


def _cmd_aggregate(args) -> int:
    try:
        aggregate = aggregate_runs(args.files)
        write_aggregate(aggregate, args.out)
    except Exception as exc:  # noqa: BLE001
        print("aggregate failed: %s" % exc, file=sys.stderr)
        return 2
    print(args.out)
    return 0


def _cmd_plot(args) -> int:
    try:
        labels = args.labels.split(",") if args.labels else None
        if labels and len(labels) != len(args.aggregates):
            raise ValueError("need one label per aggregate file")
        aggregates = {}
        for i, path in enumerate(args.aggregates):
            label = labels[i] if labels else os.path.basename(path)
            aggregates[label] = read_aggregate(path)
        written = emit_plots(aggregates, args.out)
    except Exception as exc:  # noqa: BLE001
        print("plot failed: %s" % exc, file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="planrl",
        description="planner-guided goal-conditioned RL experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--domain", default=None,
                       help="planning domain file overriding the built-in")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--trace", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_agg = sub.add_parser("aggregate", help="median/quartiles over runs")
    p_agg.add_argument("files", nargs="+")
    p_agg.add_argument("--out", required=True)
    p_agg.set_defaults(func=_cmd_aggregate)

    p_plot = sub.add_parser("plot", help="figures from aggregates")
    p_plot.add_argument("aggregates", nargs="+")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--labels", default=None,
                        help="comma-separated curve labels")
    p_plot.set_defaults(func=_cmd_plot)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
