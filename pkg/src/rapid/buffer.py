"""Bounded buffer of scored state-action pairs.

Every pair of an episode enters with the episode's score.  In ``ranked``
mode the buffer keeps the top ``capacity`` pairs under a
(score, insertion order) key, so equal scores favour newer pairs; in
``fifo`` mode it evicts oldest-first and never looks at scores.  The
``keep_whole_episodes`` variant refuses to split the lowest-ranked
retained episode and may therefore transiently exceed capacity.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np


@dataclass
class ScoredPair:
    obs: np.ndarray
    action: int | np.ndarray
    score: float
    seq: int
    episode_id: int = 0


class RankingBuffer:
    def __init__(self, capacity: int, mode: str = "ranked", keep_whole_episodes: bool = False):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if mode not in ("ranked", "fifo"):
            raise ValueError(f"mode must be 'ranked' or 'fifo', got {mode!r}")
        if keep_whole_episodes and mode != "ranked":
            raise ValueError("keep_whole_episodes requires ranked mode")
        self.capacity = capacity
        self.mode = mode
        self.keep_whole_episodes = keep_whole_episodes
        self._pairs: list[ScoredPair] = []
        self._neg_scores: list[float] = []  # ranked mode: ascending -score
        self._start = 0  # fifo mode: live region offset
        self._score_sum = 0.0
        self._next_seq = 0
        self._next_episode_id = 0

    def __len__(self) -> int:
        return len(self._pairs) - self._start

    @property
    def pairs(self) -> list[ScoredPair]:
        return self._pairs[self._start :]

    def insert_episode(self, episode, score: float) -> None:
        if not math.isfinite(score):
            raise ValueError("episode score must be finite")
        eid = self._next_episode_id
        self._next_episode_id += 1
        block = []
        for t in episode.transitions:
            block.append(ScoredPair(t.obs, t.action, score, self._next_seq, eid))
            self._next_seq += 1
        if not block:
            return
        self._score_sum += score * len(block)
        if self.mode == "fifo":
            self._pairs.extend(block)
            while len(self) > self.capacity:
                self._score_sum -= self._pairs[self._start].score
                self._start += 1
            if self._start > 4096:
                del self._pairs[: self._start]
                self._start = 0
            return

        # ranked: splice the block in front of equal-scored (older) pairs
        at = bisect_left(self._neg_scores, -score)
        self._pairs[at:at] = reversed(block)
        self._neg_scores[at:at] = [-score] * len(block)
        cut = self.capacity
        if len(self._pairs) > cut:
            if self.keep_whole_episodes:
                tail_eid = self._pairs[cut - 1].episode_id
                while cut < len(self._pairs) and self._pairs[cut].episode_id == tail_eid:
                    cut += 1
            self._score_sum -= sum(p.score for p in self._pairs[cut:])
            del self._pairs[cut:]
            del self._neg_scores[cut:]

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> list[ScoredPair]:
        """Uniform sample with replacement."""
        n = len(self)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, n, size=batch_size)
        return [self._pairs[self._start + int(i)] for i in idx]

    def min_score(self) -> float:
        if len(self) == 0:
            raise ValueError("min_score of an empty buffer")
        if self.mode == "ranked":
            return self._pairs[-1].score
        return min(p.score for p in self.pairs)

    def max_score(self) -> float:
        if len(self) == 0:
            raise ValueError("max_score of an empty buffer")
        if self.mode == "ranked":
            return self._pairs[self._start].score
        return max(p.score for p in self.pairs)

    def mean_score(self) -> float:
        if len(self) == 0:
            raise ValueError("mean_score of an empty buffer")
        return self._score_sum / len(self)
