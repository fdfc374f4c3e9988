"""Experiment configuration: dataclasses, JSON loading and validation.

The config file is JSON with one section per component::

    {
      "name": "mr-n2s4",
      "env": {"kind": "multiroom", "n_rooms": 2, "room_size": 4},
      "rapid": {"mode": "full", "weights": {"w_local": 0.1}},
      "ppo": {"lr": 1e-4},
      "total_frames": 1000000,
      "seeds": [0, 1, 2],
      "log_path": "runs"
    }

Unknown keys and out-of-range values are rejected before any environment
step, with the offending key path in the error message.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
from dataclasses import dataclass, field

from .envs import EnvSpec
from .scoring import ScoreWeights

#: Training-mode switchboard.  Exactly one mode is active per run.
MODES: dict[str, str] = {
    "full": "episode scoring, ranking buffer and imitation all enabled",
    "no_local": "episode scores ignore within-episode diversity (w_local = 0)",
    "no_global": "episode scores ignore lifetime novelty (w_global = 0)",
    "no_ext": "episode scores ignore the environment return (w_ext = 0)",
    "no_buffer": "no imitation; the episode score is added to the terminal reward",
    "no_ranking": "buffer keeps the newest pairs instead of the best-scored ones",
    "pure_exploration": "environment reward removed from both ranking and the RL objective",
    "bc_only": "no RL update; the policy only imitates the buffer",
    "ppo": "RL baseline: no scoring, no buffer, no imitation",
    "count": "RL baseline with a per-step count bonus added to the reward",
}


class ConfigError(ValueError):
    pass


@dataclass
class PpoConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    lr: float = 1e-4
    minibatches: int = 4
    epochs: int = 4
    nstep: int = 128

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("ppo.gamma must be in [0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("ppo.lam must be in [0, 1]")
        if self.clip <= 0.0:
            raise ConfigError("ppo.clip must be > 0")
        if self.minibatches < 1 or self.epochs < 1:
            raise ConfigError("ppo.minibatches and ppo.epochs must be >= 1")
        if self.nstep < 1:
            raise ConfigError("ppo.nstep must be >= 1")
        if self.nstep % self.minibatches != 0:
            raise ConfigError("ppo.nstep must be divisible by ppo.minibatches")


@dataclass
class RapidConfig:
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    buffer_size: int = 10000
    bc_steps: int = 5
    bc_batch: int = 256
    mode: str = "full"
    keep_whole_episodes: bool = False
    anneal: bool = False
    anneal_horizon: int | None = None
    count_bonus_coeff: float = 0.005

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {sorted(MODES)}")
        if self.buffer_size < 1:
            raise ConfigError("rapid.buffer_size must be >= 1")
        if self.bc_steps < 0:
            raise ConfigError("rapid.bc_steps must be >= 0")
        if self.bc_batch < 1:
            raise ConfigError("rapid.bc_batch must be >= 1")
        if self.anneal_horizon is not None and self.anneal_horizon < 1:
            raise ConfigError("rapid.anneal_horizon must be >= 1")


@dataclass
class ExperimentConfig:
    env: EnvSpec
    name: str = "experiment"
    rapid: RapidConfig = field(default_factory=RapidConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    total_frames: int = 100_000
    seeds: list[int] = field(default_factory=lambda: [0])
    eval_every: int = 0
    eval_episodes: int = 20
    log_path: str = "runs"

    def __post_init__(self):
        if self.total_frames < 1:
            raise ConfigError("total_frames must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.eval_every < 0:
            raise ConfigError("eval_every must be >= 0")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")


_SECTION_TYPES = {
    "env": EnvSpec,
    "rapid": RapidConfig,
    "ppo": PpoConfig,
    "weights": ScoreWeights,
}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTION_TYPES and isinstance(value, dict):
            kwargs[key] = _build(_SECTION_TYPES[key], value, f"{path}.{key}" if path else key)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def experiment_from_dict(data: dict) -> ExperimentConfig:
    if "env" not in data:
        raise ConfigError("config: missing required section 'env'")
    return _build(ExperimentConfig, data, "")


def load_experiment(path: str) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return experiment_from_dict(data)


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def resolve_log_root(log_path: str) -> str:
    """Relative log paths are rooted at $RAPID_LOG_ROOT when it is set."""
    root = os.environ.get("RAPID_LOG_ROOT")
    if root and not os.path.isabs(log_path):
        return os.path.join(root, log_path)
    return log_path


_ENV_PATTERNS = (
    (re.compile(r"^chain-(\d+)$"), lambda m: EnvSpec("chain", chain_length=int(m.group(1)))),
    (
        re.compile(r"^multiroom-n(\d+)-s(\d+)$"),
        lambda m: EnvSpec("multiroom", n_rooms=int(m.group(1)), room_size=int(m.group(2))),
    ),
    (
        re.compile(r"^keycorridor-s(\d+)-r(\d+)$"),
        lambda m: EnvSpec("keycorridor", room_size=int(m.group(1)), n_rooms=int(m.group(2))),
    ),
    (re.compile(r"^pointmass$"), lambda m: EnvSpec("pointmass")),
)


def env_spec_from_string(text: str) -> EnvSpec:
    """Parse compact env names: chain-8, multiroom-n2-s4, keycorridor-s3-r2, pointmass."""
    for pattern, build in _ENV_PATTERNS:
        m = pattern.match(text.lower())
        if m:
            return build(m)
    raise ConfigError(f"cannot parse env spec string {text!r}")


#: CLI sweep parameter names and the config fields they drive.
SWEEP_PARAMS = {
    "S": ("rapid", "bc_steps"),
    "D": ("rapid", "buffer_size"),
    "w1": ("rapid", "weights", "w_local"),
    "w2": ("rapid", "weights", "w_global"),
}


def apply_sweep_value(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep param must be one of {sorted(SWEEP_PARAMS)}, got {param!r}")
    data = experiment_to_dict(cfg)
    node = data
    *parents, leaf = SWEEP_PARAMS[param]
    for part in parents:
        node = node[part]
    node[leaf] = int(value) if param in ("S", "D") else float(value)
    data["name"] = f"{cfg.name}-{param}{value:g}"
    return experiment_from_dict(data)
