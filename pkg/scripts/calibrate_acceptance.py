#!/usr/bin/env python3
"""Run the desk-scale training cells once and report the measured numbers.

This executes the same protocol as tests/test_acceptance.py so thresholds
and budgets can be sanity-checked against real runs before freezing them.
"""

import json
import os
import sys
import tempfile
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

import numpy as np

from desk import desk_env, run_cell
from rapid.harness import rollout_episodes
from rapid.nets import load_checkpoint
from rapid.scoring import distinct_observations

SEEDS = (0, 1, 2)
M = 1_000_000


def main():
    out = tempfile.mkdtemp(prefix="rapid-calib-")
    report = {}
    t0 = time.time()

    def cell(env, mode, seed, frames, **kw):
        t = time.time()
        r = run_cell(env, mode, seed, frames, out, **kw)
        r["wall_minutes"] = round((time.time() - t) / 60, 2)
        key = f"{r['env']}-{mode}-s{seed}"
        report[key] = {k: r[k] for k in ("max_return", "frames", "reached", "crossed_cap", "wall_minutes")}
        print(f"{key}: max={r['max_return']:.4f} frames={r['frames']} "
              f"reached={r['reached']} crossed={r['crossed_cap']} ({r['wall_minutes']}m)", flush=True)
        return r

    n2, n7 = desk_env(2), desk_env(7)

    print("== stated criterion env: N2S4 ==")
    for s in SEEDS:
        cell(n2, "full", s, M, reach=0.5)
    for s in SEEDS:
        cell(n2, "ppo", s, M, stop_above=0.05)
    for s in SEEDS:
        cell(n2, "no_buffer", s, M, stop_above=0.1)
    for s in SEEDS:
        cell(n2, "no_ranking", s, M, stop_above=0.1)

    print("== supplementary env: N7S4 ==")
    for s in SEEDS:
        cell(n7, "full", s, M, reach=0.5)
    for s in SEEDS:
        cell(n7, "ppo", s, M, stop_above=0.05)
    for s in SEEDS:
        cell(n7, "no_buffer", s, 500_000, stop_above=0.1)
    for s in SEEDS:
        cell(n7, "no_ranking", s, 500_000, stop_above=0.1)

    print("== pure exploration on N2S4, 200k ==")
    for s in SEEDS:
        r = cell(n2, "pure_exploration", s, 200_000)
        params, _, _ = load_checkpoint(r["checkpoint"])
        trained = rollout_episodes(params, n2, 100, seed=s, continuous=False, policy="sample")
        random_eps = rollout_episodes(None, n2, 100, seed=s, continuous=False, policy="random")
        tr = float(np.mean([distinct_observations(e) for e in trained]))
        rd = float(np.mean([distinct_observations(e) for e in random_eps]))
        ev = float(np.mean([e.total_reward() for e in rollout_episodes(params, n2, 50, seed=s, continuous=False, policy="greedy")]))
        report[f"pure-s{s}"] = {"trained_distinct": tr, "random_distinct": rd, "ratio": tr / rd, "eval_return": ev}
        print(f"pure-s{s}: distinct {tr:.2f} vs random {rd:.2f} (x{tr/rd:.2f}) eval={ev:.3f}", flush=True)

    report["total_minutes"] = round((time.time() - t0) / 60, 1)
    path = os.path.join(os.path.dirname(__file__), "..", "calibration_report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    print(f"report -> {path} ({report['total_minutes']} min total)")


if __name__ == "__main__":
    main()
