#!/usr/bin/env python3
"""Regenerate the golden regression files under tests/golden/.

Run from the repository root after deliberate behavior changes; review the
diff before committing.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rapid.agent import Trainer
from rapid.config import PpoConfig, RapidConfig
from rapid.envs import EnvSpec, make_env

GOLDEN = os.path.join(os.path.dirname(__file__), "..", "tests", "golden")


def multiroom_layout():
    env = make_env(EnvSpec("multiroom", n_rooms=2, room_size=4, layout_seed_stream=7))
    env.reset(0)
    with open(os.path.join(GOLDEN, "multiroom_n2s4_stream7_ep0.txt"), "w") as fh:
        fh.write(env.render_text())


def grid_observation():
    env = make_env(EnvSpec("multiroom", n_rooms=2, room_size=4, layout_seed_stream=7))
    obs = env.reset(0)
    for a in (2, 1):  # forward, turn right
        obs, _, _ = env.step(a)
    with open(os.path.join(GOLDEN, "multiroom_obs_stream7_ep0.txt"), "w") as fh:
        fh.write(" ".join(str(int(v)) for v in obs) + "\n")


def chain_metrics_trace():
    tr = Trainer(
        EnvSpec("chain", chain_length=8, layout_seed_stream=1),
        RapidConfig(buffer_size=200, bc_batch=16),
        PpoConfig(nstep=64, minibatches=4, epochs=2),
        seed=0,
    )
    lines = []
    for _ in range(2):
        s = tr.iteration()
        lines.append(
            f"{s.frames},{s.iteration},{s.mean_return_100!r},{s.s_local_mean!r},"
            f"{s.s_global_mean!r},{s.buffer_len},{s.buffer_min_score!r},"
            f"{s.ppo_loss!r},{s.bc_loss!r}"
        )
    with open(os.path.join(GOLDEN, "chain_two_iterations.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    os.makedirs(GOLDEN, exist_ok=True)
    multiroom_layout()
    grid_observation()
    chain_metrics_trace()
    print(f"golden files written to {GOLDEN}")
