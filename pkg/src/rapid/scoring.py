"""Episode exploration scores and the lifetime state-count table.

An episode earns three scalar scores:

* extrinsic: the episodic environment return;
* local: within-episode state diversity, either the distinct/total ratio
  over visited discrete states or the mean per-dimension standard
  deviation for continuous states;
* global: the mean lifetime count bonus ``1/sqrt(N(s))`` over the visited
  states, where ``N(s)`` only ever grows.

The weighted sum of the three ranks episodes against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _obs_key(obs) -> bytes:
    """Canonical byte key for a small-int observation vector."""
    arr = np.asarray(obs)
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise TypeError(f"countable observations must be integer-valued, got {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("countable observation values must fit in uint8")
        arr = arr.astype(np.uint8)
    return arr.tobytes()


class CountTable:
    """Lifetime visit counts keyed by observation content."""

    def __init__(self):
        self.counts: dict[bytes, int] = {}
        self.total_insertions = 0

    def __len__(self) -> int:
        return len(self.counts)

    def increment(self, obs) -> int:
        key = _obs_key(obs)
        n = self.counts.get(key, 0) + 1
        self.counts[key] = n
        self.total_insertions += 1
        return n

    def get(self, obs) -> int:
        return self.counts.get(_obs_key(obs), 0)

    def dump(self, fileobj) -> None:
        # debugging aid, not a stability contract
        for key, count in self.counts.items():
            fileobj.write(f"{key.hex()} {count}\n")


@dataclass
class ScoreWeights:
    w_ext: float = 1.0
    w_local: float = 0.1
    w_global: float = 0.001

    def __post_init__(self):
        for name in ("w_ext", "w_local", "w_global"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass
class EpisodeScore:
    s_ext: float
    s_local: float
    s_global: float
    s_total: float


def local_score_discrete(episode) -> float:
    """Distinct visited states divided by total visited states."""
    obs = episode.observations()
    if not obs:
        raise ValueError("cannot score an empty episode")
    distinct = len({_obs_key(o) for o in obs})
    return distinct / len(obs)


def distinct_observations(episode) -> int:
    obs = episode.observations()
    if not obs:
        raise ValueError("cannot score an empty episode")
    return len({_obs_key(o) for o in obs})


def coverage_rate(episode, num_states: int) -> float:
    """Fraction of an environment's states visited during one episode."""
    if num_states < 1:
        raise ValueError("num_states must be >= 1")
    return distinct_observations(episode) / num_states


def local_score_continuous(episode) -> float:
    """Mean population standard deviation per state dimension."""
    obs = episode.observations()
    if not obs:
        raise ValueError("cannot score an empty episode")
    mat = np.stack([np.asarray(o, dtype=float) for o in obs])
    if mat.ndim != 2:
        raise ValueError("observations must share a common 1-D shape")
    return float(mat.std(axis=0).sum() / mat.shape[1])


def update_counts(table: CountTable, episode) -> None:
    """Count every state the episode visited, revisits included."""
    for obs in episode.observations():
        table.increment(obs)


def global_score(table: CountTable, episode) -> float:
    """Mean count bonus over the episode; counts must already be updated."""
    obs = episode.observations()
    if not obs:
        raise ValueError("cannot score an empty episode")
    total = 0.0
    for o in obs:
        n = table.get(o)
        if n <= 0:
            raise RuntimeError(
                "global_score saw a zero count; update_counts must run before scoring"
            )
        total += 1.0 / math.sqrt(n)
    return total / len(obs)


def episodic_score(s_ext: float, s_local: float, s_global: float, weights: ScoreWeights) -> float:
    for name, v in (("s_ext", s_ext), ("s_local", s_local), ("s_global", s_global)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    return weights.w_ext * s_ext + weights.w_local * s_local + weights.w_global * s_global
