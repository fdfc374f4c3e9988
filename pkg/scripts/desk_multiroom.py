#!/usr/bin/env python3
"""Desk-scale comparison: episode-ranked exploration vs the plain RL baseline.

Trains both configurations on a MultiRoom world across a few seeds, prints
the per-seed maximum returns, and (when rapid-plots is installed) renders
the learning-curve figure with a std band.

Example:
    python3 scripts/desk_multiroom.py --rooms 7 --frames 1000000 --out runs-desk
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rapid.config import ExperimentConfig, PpoConfig, RapidConfig
from rapid.envs import EnvSpec
from rapid.harness import run_experiment


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--rooms", type=int, default=7)
    ap.add_argument("--room-size", type=int, default=4)
    ap.add_argument("--frames", type=int, default=1_000_000)
    ap.add_argument("--seeds", type=str, default="0,1,2")
    ap.add_argument("--out", type=str, default="runs-desk")
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]

    env = EnvSpec("multiroom", n_rooms=args.rooms, room_size=args.room_size, layout_seed_stream=7)
    summaries = {}
    for mode in ("full", "ppo"):
        cfg = ExperimentConfig(
            env=env,
            name=f"mr-n{args.rooms}s{args.room_size}-{mode}",
            rapid=RapidConfig(mode=mode),
            ppo=PpoConfig(lr=1e-4, nstep=128),
            total_frames=args.frames,
            seeds=seeds,
            log_path=args.out,
        )
        print(f"== {cfg.name}: {args.frames} frames x {len(seeds)} seeds")
        summaries[mode] = run_experiment(cfg)
        for seed, ret in summaries[mode]["per_seed_max_return"].items():
            print(f"   seed {seed}: max return {ret:.3f}")

    plot_cfg = {
        "panels": [
            {
                "title": f"MultiRoom-N{args.rooms}-S{args.room_size}",
                "metric": "mean_return_100",
                "filename": "desk_comparison.png",
                "curves": [
                    {
                        "label": mode,
                        "csv_paths": [
                            os.path.join(summaries[mode]["run_dir"], f"{s}.csv") for s in seeds
                        ],
                        "smoothing": 20,
                    }
                    for mode in ("full", "ppo")
                ],
            }
        ]
    }
    cfg_path = os.path.join(args.out, "plot_desk_comparison.json")
    with open(cfg_path, "w") as fh:
        json.dump(plot_cfg, fh, indent=2)
    try:
        from rapid_plots import render
    except ImportError:
        print(f"rapid-plots not installed; plot config left at {cfg_path}")
        return 0
    results = render(cfg_path, args.out)
    for title, (path, _) in results.items():
        print(f"figure: {title} -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
