"""Experiment harness: seeded runs, CSV metrics, summaries, eval, sweeps.

Each seed runs as an isolated trainer and writes
``<log_path>/<name>/<seed>.csv`` plus a final checkpoint; a ``summary.json``
aggregates max/final returns across seeds.  Rerunning a (config, seed)
pair reproduces the CSV byte-for-byte except for the wall-clock column.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .agent import Trainer
from .config import (
    ExperimentConfig,
    apply_sweep_value,
    experiment_to_dict,
    resolve_log_root,
)
from .envs import Episode, EnvSpec, Transition, make_env
from .nets import forward, load_checkpoint, make_dist, save_checkpoint

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "frames",
    "iteration",
    "mean_return_100",
    "s_local_mean",
    "s_global_mean",
    "buffer_len",
    "buffer_min_score",
    "ppo_loss",
    "bc_loss",
    "wall_seconds",
)
_INT_COLUMNS = {"frames", "iteration", "buffer_len"}

# seeds are mixed into the env layout stream so each seed sees its own
# procedural sequence; layouts stay a pure function of (stream, index)
_SEED_STREAM_STRIDE = 1_000_003
# eval episodes use indices far above anything reachable in training
_EVAL_INDEX_BASE = 2**31


@dataclass
class MetricsRow:
    frames: int
    iteration: int
    mean_return_100: float
    s_local_mean: float
    s_global_mean: float
    buffer_len: int
    buffer_min_score: float
    ppo_loss: float
    bc_loss: float
    wall_seconds: float

    def to_csv_line(self) -> str:
        parts = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            parts.append(str(int(v)) if col in _INT_COLUMNS else repr(float(v)))
        return ",".join(parts)

    @classmethod
    def from_csv_line(cls, line: str) -> "MetricsRow":
        parts = line.rstrip("\n").split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"expected {len(CSV_COLUMNS)} columns, got {len(parts)}")
        kwargs = {
            col: (int(p) if col in _INT_COLUMNS else float(p))
            for col, p in zip(CSV_COLUMNS, parts)
        }
        return cls(**kwargs)


def read_metrics_csv(path) -> list[MetricsRow]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != ",".join(CSV_COLUMNS):
            raise ValueError(f"unexpected CSV header in {path}")
        return [MetricsRow.from_csv_line(line) for line in fh if line.strip()]


def seed_env_spec(spec: EnvSpec, seed: int) -> EnvSpec:
    return dataclasses.replace(
        spec, layout_seed_stream=spec.layout_seed_stream + _SEED_STREAM_STRIDE * (seed + 1)
    )


def run_seed(cfg: ExperimentConfig, seed: int, run_dir: str, stop_when=None) -> dict:
    """Train one seed, streaming metrics to ``<run_dir>/<seed>.csv``."""
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    os.makedirs(run_dir, exist_ok=True)
    csv_path = os.path.join(run_dir, f"{seed}.csv")
    ckpt_path = os.path.join(run_dir, f"{seed}.npz")

    trainer = Trainer(
        seed_env_spec(cfg.env, seed),
        cfg.rapid,
        cfg.ppo,
        seed=seed,
        anneal_horizon=cfg.rapid.anneal_horizon or cfg.total_frames,
    )
    max_return = -math.inf
    final_return = 0.0
    evals: list[dict] = []
    next_eval = cfg.eval_every if cfg.eval_every else None
    t0 = time.perf_counter()

    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        try:
            while trainer.frames < cfg.total_frames:
                stats = trainer.iteration()
                row = MetricsRow(
                    frames=stats.frames,
                    iteration=stats.iteration,
                    mean_return_100=stats.mean_return_100,
                    s_local_mean=stats.s_local_mean,
                    s_global_mean=stats.s_global_mean,
                    buffer_len=stats.buffer_len,
                    buffer_min_score=stats.buffer_min_score,
                    ppo_loss=stats.ppo_loss,
                    bc_loss=stats.bc_loss,
                    wall_seconds=time.perf_counter() - t0,
                )
                fh.write(row.to_csv_line() + "\n")
                if stats.iteration % 32 == 0:
                    fh.flush()
                max_return = max(max_return, stats.mean_return_100)
                final_return = stats.mean_return_100
                if next_eval is not None and stats.frames >= next_eval:
                    mean_ret, success = evaluate_params(
                        trainer.params, cfg.env, cfg.eval_episodes, seed, trainer.continuous
                    )
                    evals.append(
                        {"frames": stats.frames, "mean_return": mean_ret, "success_rate": success}
                    )
                    next_eval += cfg.eval_every
                if stop_when is not None and stop_when(stats):
                    logger.info("seed %d stopped early at %d frames", seed, stats.frames)
                    break
        except Exception:
            fh.flush()
            logger.exception("seed %d failed mid-run; partial CSV kept at %s", seed, csv_path)
            raise

    meta = {
        "obs_dim": trainer.env.obs_dim,
        "action_dim": trainer.env.action_dim if trainer.continuous else trainer.env.n_actions,
        "continuous": trainer.continuous,
        "env": dataclasses.asdict(cfg.env),
        "seed": seed,
        "frames": trainer.frames,
    }
    save_checkpoint(ckpt_path, trainer.params, trainer.adam, meta)
    return {
        "seed": seed,
        "max_return": max_return,
        "final_return": final_return,
        "frames": trainer.frames,
        "csv": csv_path,
        "checkpoint": ckpt_path,
        "eval": evals,
    }


def run_experiment(cfg: ExperimentConfig, stop_when=None) -> dict:
    """Run every seed and write ``summary.json`` next to the per-seed CSVs."""
    run_dir = os.path.join(resolve_log_root(cfg.log_path), cfg.name)
    results = [run_seed(cfg, seed, run_dir, stop_when=stop_when) for seed in cfg.seeds]
    max_returns = [r["max_return"] for r in results]
    summary = {
        "schema_version": CSV_SCHEMA_VERSION,
        "name": cfg.name,
        "run_dir": run_dir,
        "config": experiment_to_dict(cfg),
        "per_seed_max_return": {str(r["seed"]): r["max_return"] for r in results},
        "per_seed_final_return": {str(r["seed"]): r["final_return"] for r in results},
        "mean_max": float(np.mean(max_returns)),
        "std_max": float(np.std(max_returns)),
        "eval": {str(r["seed"]): r["eval"] for r in results},
        "checkpoints": {str(r["seed"]): r["checkpoint"] for r in results},
    }
    with open(os.path.join(run_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# ---------------------------------------------------------------------------
# evaluation


def rollout_episodes(
    params: dict | None,
    env_spec: EnvSpec,
    n_episodes: int,
    seed: int,
    continuous: bool,
    policy: str = "greedy",
) -> list[Episode]:
    """Roll fresh procedurally generated episodes under a fixed policy.

    ``policy`` is ``greedy`` (mode action), ``sample`` (stochastic) or
    ``random`` (uniform actions, ignoring ``params``).
    """
    env = make_env(env_spec)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE7A1]))
    episodes = []
    base = _EVAL_INDEX_BASE + seed * 1_000_000
    for i in range(n_episodes):
        obs = env.reset(base + i)
        transitions = []
        done = False
        while not done:
            if policy == "random":
                if continuous:
                    action = rng.uniform(-1.0, 1.0, size=env.action_dim)
                else:
                    action = int(rng.integers(env.n_actions))
            else:
                fwd = forward(params, (obs / env.obs_scale)[None, :])
                dist = make_dist(params, fwd.head, continuous)
                action = (dist.sample(rng) if policy == "sample" else dist.greedy())[0]
            new_obs, reward, done = env.step(action)
            transitions.append(Transition(obs, action, reward, done))
            obs = new_obs
        episodes.append(Episode(transitions, base + i, final_obs=obs))
    return episodes


def evaluate_params(
    params: dict,
    env_spec: EnvSpec,
    n_episodes: int,
    seed: int,
    continuous: bool,
) -> tuple[float, float]:
    episodes = rollout_episodes(params, env_spec, n_episodes, seed, continuous, policy="greedy")
    returns = [ep.total_reward() for ep in episodes]
    success = [ep.total_reward() > 0.0 for ep in episodes]
    return float(np.mean(returns)), float(np.mean(success))


def evaluate(checkpoint_path: str, env_spec: EnvSpec, n_episodes: int = 20, seed: int = 0):
    """Greedy evaluation of a stored checkpoint on fresh episodes."""
    params, _, meta = load_checkpoint(checkpoint_path)
    env = make_env(env_spec)
    action_dim = env.action_dim if env.continuous else env.n_actions
    if meta["obs_dim"] != env.obs_dim or meta["action_dim"] != action_dim:
        raise ValueError(
            f"checkpoint was trained for obs_dim={meta['obs_dim']} "
            f"action_dim={meta['action_dim']}, env needs obs_dim={env.obs_dim} "
            f"action_dim={action_dim}"
        )
    if bool(meta["continuous"]) != env.continuous:
        raise ValueError("checkpoint/env action space mismatch")
    return evaluate_params(params, env_spec, n_episodes, seed, env.continuous)


def sweep(cfg: ExperimentConfig, param: str, values: list[float], stop_when=None) -> list[dict]:
    """Run the config once per value of one hyperparameter."""
    return [
        run_experiment(apply_sweep_value(cfg, param, v), stop_when=stop_when) for v in values
    ]
