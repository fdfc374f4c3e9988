"""Episode-ranked exploration for sparse-reward procedurally generated tasks."""

from .buffer import RankingBuffer, ScoredPair
from .config import ExperimentConfig, PpoConfig, RapidConfig, load_experiment
from .envs import Episode, EnvSpec, GridAction, LayoutGenerationError, Transition, make_env
from .scoring import (
    CountTable,
    EpisodeScore,
    ScoreWeights,
    coverage_rate,
    episodic_score,
    global_score,
    local_score_continuous,
    local_score_discrete,
    update_counts,
)
from .agent import Trainer, anneal_factor, compute_gae, count_bonus
from .harness import evaluate, run_experiment, run_seed, sweep

__all__ = [
    "CountTable",
    "Episode",
    "EpisodeScore",
    "EnvSpec",
    "ExperimentConfig",
    "GridAction",
    "LayoutGenerationError",
    "PpoConfig",
    "RankingBuffer",
    "RapidConfig",
    "ScoreWeights",
    "ScoredPair",
    "Trainer",
    "Transition",
    "anneal_factor",
    "compute_gae",
    "count_bonus",
    "coverage_rate",
    "episodic_score",
    "evaluate",
    "global_score",
    "local_score_continuous",
    "local_score_discrete",
    "load_experiment",
    "make_env",
    "run_experiment",
    "run_seed",
    "sweep",
    "update_counts",
]
