"""Policy optimization and the episode-ranking training loop.

One training iteration rolls the policy out for ``nstep`` frames, applies
a clipped-surrogate RL update, then scores every episode that finished
during the rollout, pushes its state-action pairs into the ranking buffer
and runs a few behavior-cloning steps on buffer samples.  Ablation and
baseline behaviors are selected by ``RapidConfig.mode``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import scoring
from .buffer import RankingBuffer
from .config import PpoConfig, RapidConfig
from .envs import Episode, EnvSpec, Transition, make_env
from .nets import Adam, Categorical, DiagGaussian, LOG_STD_MAX, LOG_STD_MIN, backward, forward, init_params, make_dist
from .scoring import CountTable, EpisodeScore

logger = logging.getLogger(__name__)


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Recursive generalized advantage estimation (unnormalized)."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError("rewards, values and dones must have equal length")
    T = len(rewards)
    adv = np.zeros(T)
    acc = 0.0
    next_value = bootstrap_value
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        acc = delta + gamma * lam * nonterminal * acc
        adv[t] = acc
        next_value = values[t]
    return adv, adv + values


def anneal_factor(step: int, horizon: int) -> float:
    """Linear 1 -> 0 schedule over ``horizon`` steps."""
    if horizon <= 0:
        raise ValueError("anneal horizon must be > 0")
    return min(1.0, max(0.0, 1.0 - step / horizon))


def count_bonus(reward: float, obs, table: CountTable, coeff: float) -> float:
    """Per-step count bonus; the visit must already be counted."""
    n = table.get(obs)
    if n <= 0:
        raise RuntimeError("count_bonus requires the observation to be counted first")
    return reward + coeff / math.sqrt(n)


# ---------------------------------------------------------------------------
# loss gradients (head-level, fed into nets.backward)


def _categorical_head_grad(dist: Categorical, actions, dlogp, ent_coef, batch_size):
    logp = dist.log_probs()
    probs = np.exp(logp)
    d_head = dlogp[:, None] * (-probs)
    d_head[np.arange(len(actions)), actions] += dlogp
    if ent_coef:
        entropy = -(probs * logp).sum(axis=-1)
        d_head += (ent_coef / batch_size) * probs * (logp + entropy[:, None])
    return d_head


def _gaussian_head_grads(dist: DiagGaussian, actions, dlogp, ent_coef, batch_size):
    ls = dist.clamped_log_std()
    inv_var = np.exp(-2.0 * ls)
    z2 = (actions - dist.mean) ** 2 * inv_var
    d_mean = dlogp[:, None] * (actions - dist.mean) * inv_var
    in_range = (dist.log_std > LOG_STD_MIN) & (dist.log_std < LOG_STD_MAX)
    d_log_std = (dlogp[:, None] * (z2 - 1.0)).sum(axis=0)
    if ent_coef:
        d_log_std -= ent_coef
    return d_mean, np.where(in_range, d_log_std, 0.0)


def ppo_loss_and_grads(
    params: dict[str, np.ndarray],
    obs: np.ndarray,
    actions: np.ndarray,
    old_logp: np.ndarray,
    adv: np.ndarray,
    returns: np.ndarray,
    old_values: np.ndarray,
    cfg: PpoConfig,
    continuous: bool,
) -> tuple[dict[str, float], dict[str, np.ndarray]]:
    """Clipped-surrogate loss with entropy bonus and clipped value loss."""
    B = len(adv)
    fwd = forward(params, obs)
    dist = make_dist(params, fwd.head, continuous)
    logp = dist.log_prob(actions)
    ratio = np.exp(logp - old_logp)
    u1 = ratio * adv
    u2 = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv
    pg_loss = -np.minimum(u1, u2).mean()
    entropy = dist.entropy().mean()

    v = fwd.value
    v_clip = old_values + np.clip(v - old_values, -cfg.clip, cfg.clip)
    l1 = (v - returns) ** 2
    l2 = (v_clip - returns) ** 2
    vf_loss = 0.5 * np.maximum(l1, l2).mean()

    total = pg_loss - cfg.ent_coef * entropy + cfg.vf_coef * vf_loss

    # gradient flows through the unclipped branch where it attains the min
    dlogp = -(adv * ratio * (u1 <= u2)) / B
    if continuous:
        d_head, d_log_std = _gaussian_head_grads(dist, actions, dlogp, cfg.ent_coef, B)
    else:
        d_head = _categorical_head_grad(dist, actions, dlogp, cfg.ent_coef, B)

    clip_pass = np.abs(v - old_values) < cfg.clip
    d_value = cfg.vf_coef * np.where(l1 >= l2, v - returns, (v_clip - returns) * clip_pass) / B

    grads = backward(params, fwd, d_head, d_value)
    if continuous:
        grads["log_std"] = d_log_std
    stats = {
        "policy_loss": float(pg_loss),
        "value_loss": float(vf_loss),
        "entropy": float(entropy),
        "total_loss": float(total),
        "clip_frac": float(np.mean(u1 > u2)),
    }
    return stats, grads


def bc_loss_and_grads(
    params: dict[str, np.ndarray],
    obs: np.ndarray,
    actions: np.ndarray,
    continuous: bool,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean negative log-likelihood of stored actions; value net untouched."""
    B = len(obs)
    fwd = forward(params, obs, policy_only=True)
    dist = make_dist(params, fwd.head, continuous)
    loss = -dist.log_prob(actions).mean()
    dlogp = np.full(B, -1.0 / B)
    if continuous:
        d_head, d_log_std = _gaussian_head_grads(dist, np.asarray(actions, dtype=float), dlogp, 0.0, B)
    else:
        d_head = _categorical_head_grad(dist, np.asarray(actions, dtype=int), dlogp, 0.0, B)
    grads = backward(params, fwd, d_head, None)
    if continuous:
        grads["log_std"] = d_log_std
    return float(loss), grads


def ppo_update(
    params: dict[str, np.ndarray],
    adam: Adam,
    obs: np.ndarray,
    actions: np.ndarray,
    old_logp: np.ndarray,
    adv: np.ndarray,
    returns: np.ndarray,
    old_values: np.ndarray,
    cfg: PpoConfig,
    rng: np.random.Generator,
    continuous: bool,
) -> dict[str, float]:
    """Epochs of minibatch Adam steps; advantages normalized per rollout."""
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    T = len(obs)
    stats_sum: dict[str, float] = {}
    n_updates = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(T)
        for chunk in np.split(perm, cfg.minibatches):
            stats, grads = ppo_loss_and_grads(
                params,
                obs[chunk],
                actions[chunk],
                old_logp[chunk],
                adv[chunk],
                returns[chunk],
                old_values[chunk],
                cfg,
                continuous,
            )
            if not math.isfinite(stats["total_loss"]):
                raise RuntimeError(f"non-finite RL loss: {stats}")
            adam.step(params, grads)
            for k, v in stats.items():
                stats_sum[k] = stats_sum.get(k, 0.0) + v
            n_updates += 1
    return {k: v / n_updates for k, v in stats_sum.items()}


def bc_update(
    params: dict[str, np.ndarray],
    adam: Adam,
    buffer: RankingBuffer,
    steps: int,
    batch_size: int,
    rng: np.random.Generator,
    obs_scale: np.ndarray,
    continuous: bool,
) -> float | None:
    """Behavior cloning on buffer samples; returns mean loss or None if skipped."""
    if steps <= 0:
        return None
    if len(buffer) == 0:
        logger.info("behavior cloning skipped: buffer is empty")
        return None
    total = 0.0
    for _ in range(steps):
        pairs = buffer.sample_batch(batch_size, rng)
        obs = np.stack([p.obs for p in pairs]).astype(float) / obs_scale
        if continuous:
            actions = np.stack([np.asarray(p.action, dtype=float) for p in pairs])
        else:
            actions = np.array([p.action for p in pairs], dtype=int)
        loss, grads = bc_loss_and_grads(params, obs, actions, continuous)
        adam.step(params, grads)
        total += loss
    return total / steps


# ---------------------------------------------------------------------------
# the training loop


@dataclass
class IterationStats:
    frames: int
    iteration: int
    mean_return_100: float
    s_local_mean: float
    s_global_mean: float
    s_total_mean: float
    buffer_len: int
    buffer_min_score: float
    ppo_loss: float
    bc_loss: float
    episodes_done: int


class Trainer:
    """Owns one policy, one environment and all training state for a seed."""

    def __init__(
        self,
        env_spec: EnvSpec,
        rapid_cfg: RapidConfig | None = None,
        ppo_cfg: PpoConfig | None = None,
        seed: int = 0,
        anneal_horizon: int | None = None,
    ):
        self.rapid = rapid_cfg or RapidConfig()
        self.ppo = ppo_cfg or PpoConfig()
        self.mode = self.rapid.mode
        self.env = make_env(env_spec)
        self.continuous = self.env.continuous

        ss = np.random.SeedSequence([seed, 0xA11CE])
        init_rng, self.action_rng, self.ppo_rng, self.bc_rng = (
            np.random.default_rng(c) for c in ss.spawn(4)
        )
        action_dim = self.env.action_dim if self.continuous else self.env.n_actions
        self.params = init_params(init_rng, self.env.obs_dim, action_dim, self.continuous)
        self.adam = Adam(self.params, lr=self.ppo.lr)

        self.weights = self._effective_weights()
        uses_buffer = self.mode not in ("no_buffer", "ppo", "count")
        self.buffer = None
        if uses_buffer:
            self.buffer = RankingBuffer(
                self.rapid.buffer_size,
                mode="fifo" if self.mode == "no_ranking" else "ranked",
                keep_whole_episodes=self.rapid.keep_whole_episodes,
            )
        needs_counts = self.mode == "count" or (
            not self.continuous and self.mode not in ("ppo",) and self.weights.w_global != 0.0
        )
        self.counts = CountTable() if needs_counts else None

        self.anneal_horizon = anneal_horizon or self.rapid.anneal_horizon
        self.frames = 0
        self.iteration_count = 0
        self.episode_index = 0
        self.returns_100: list[float] = []
        self._partial: list[Transition] = []
        self._obs = self.env.reset(self.episode_index)
        if self.mode == "count":
            self.counts.increment(self._obs)
        # test instrumentation: rewards fed to the last RL update
        self.last_training_rewards: np.ndarray | None = None

    def _effective_weights(self) -> scoring.ScoreWeights:
        w = replace(self.rapid.weights)
        if self.mode == "no_local":
            w.w_local = 0.0
        if self.mode == "no_global":
            w.w_global = 0.0
        if self.mode in ("no_ext", "pure_exploration"):
            w.w_ext = 0.0
        if self.continuous:
            w.w_global = 0.0  # counting continuous states is meaningless
        return w

    # -- rollout -------------------------------------------------------

    def _collect(self):
        T = self.ppo.nstep
        env = self.env
        scale = env.obs_scale
        raw_obs = []
        actions = []
        rewards = np.zeros(T)
        dones = np.zeros(T)
        values = np.zeros(T)
        logps = np.zeros(T)
        completed: list[tuple[int, Episode]] = []

        # Adam updates arrays in place, so these refs stay current all rollout.
        p = self.params
        pw1, pb1, pw2, pb2, pw3, pb3 = (p[f"pi.{k}"] for k in ("w1", "b1", "w2", "b2", "w3", "b3"))
        vw1, vb1, vw2, vb2, vw3, vb3 = (p[f"vf.{k}"] for k in ("w1", "b1", "w2", "b2", "w3", "b3"))
        rand = self.action_rng.random
        for t in range(T):
            obs = self._obs
            x = (obs / scale)[None, :]
            # inline forward + sampling: this is the per-frame hot path
            pi_h1 = np.tanh(x @ pw1 + pb1)
            pi_h2 = np.tanh(pi_h1 @ pw2 + pb2)
            head = (pi_h2 @ pw3 + pb3)[0]
            vf_h1 = np.tanh(x @ vw1 + vb1)
            vf_h2 = np.tanh(vf_h1 @ vw2 + vb2)
            values[t] = (vf_h2 @ vw3)[0, 0] + vb3[0]
            if self.continuous:
                ls = np.clip(p["log_std"], LOG_STD_MIN, LOG_STD_MAX)
                action = head + np.exp(ls) * self.action_rng.standard_normal(head.shape)
                z = (action - head) / np.exp(ls)
                logps[t] = (-0.5 * z * z - ls - 0.5 * math.log(2.0 * math.pi)).sum()
            else:
                lp = head - head.max()
                lp -= math.log(np.exp(lp).sum())
                action = int((np.exp(lp).cumsum() > rand()).argmax())
                logps[t] = lp[action]
            raw_obs.append(obs)
            actions.append(action)

            new_obs, reward, done = env.step(action)
            dones[t] = float(done)
            self._partial.append(Transition(obs, action, reward, done))

            if self.mode == "pure_exploration":
                rewards[t] = 0.0
            elif self.mode == "count":
                self.counts.increment(new_obs)
                rewards[t] = count_bonus(reward, new_obs, self.counts, self.rapid.count_bonus_coeff)
            else:
                rewards[t] = reward

            if done:
                episode = Episode(self._partial, self.episode_index, final_obs=new_obs)
                completed.append((t, episode))
                self.returns_100.append(episode.total_reward())
                if len(self.returns_100) > 100:
                    del self.returns_100[: len(self.returns_100) - 100]
                self._partial = []
                self.episode_index += 1
                new_obs = env.reset(self.episode_index)
                if self.mode == "count":
                    self.counts.increment(new_obs)
            self._obs = new_obs

        bootstrap = float(forward(self.params, (self._obs / scale)[None, :]).value[0])
        obs_mat = np.stack(raw_obs).astype(float) / scale
        if self.continuous:
            action_arr = np.stack([np.asarray(a, dtype=float) for a in actions])
        else:
            action_arr = np.array(actions, dtype=int)
        return obs_mat, action_arr, rewards, dones, values, logps, bootstrap, completed

    def score_episode(self, episode: Episode) -> EpisodeScore:
        s_ext = episode.total_reward()
        if self.continuous:
            s_local = scoring.local_score_continuous(episode)
        else:
            s_local = scoring.local_score_discrete(episode)
        s_global = 0.0
        if self.counts is not None and self.weights.w_global != 0.0:
            if self.mode != "count":
                scoring.update_counts(self.counts, episode)
            s_global = scoring.global_score(self.counts, episode)
        s_total = scoring.episodic_score(s_ext, s_local, s_global, self.weights)
        return EpisodeScore(s_ext, s_local, s_global, s_total)

    def iteration(self) -> IterationStats:
        (
            obs,
            actions,
            rewards,
            dones,
            values,
            logps,
            bootstrap,
            completed,
        ) = self._collect()

        scores: list[EpisodeScore] = []
        if self.mode == "no_buffer":
            # deliver the episode score as a terminal reward before the RL update
            for t_idx, episode in completed:
                s = self.score_episode(episode)
                scores.append(s)
                rewards[t_idx] += s.s_total

        ppo_stats = None
        if self.mode != "bc_only":
            self.last_training_rewards = rewards.copy()
            adv, returns = compute_gae(
                rewards, values, dones, bootstrap, self.ppo.gamma, self.ppo.lam
            )
            ppo_stats = ppo_update(
                self.params,
                self.adam,
                obs,
                actions,
                logps,
                adv,
                returns,
                values,
                self.ppo,
                self.ppo_rng,
                self.continuous,
            )

        bc_losses = []
        if self.buffer is not None:
            steps = self.rapid.bc_steps
            if self.rapid.anneal and self.anneal_horizon:
                steps = round(steps * anneal_factor(self.frames, self.anneal_horizon))
            for _, episode in completed:
                s = self.score_episode(episode)
                scores.append(s)
                self.buffer.insert_episode(episode, s.s_total)
                loss = bc_update(
                    self.params,
                    self.adam,
                    self.buffer,
                    steps,
                    self.rapid.bc_batch,
                    self.bc_rng,
                    self.env.obs_scale,
                    self.continuous,
                )
                if loss is not None:
                    bc_losses.append(loss)
        elif self.mode in ("ppo", "count"):
            # baselines still log per-episode scores for analysis plots
            for _, episode in completed:
                scores.append(self.score_episode(episode))

        self.frames += self.ppo.nstep
        self.iteration_count += 1

        nan = float("nan")
        return IterationStats(
            frames=self.frames,
            iteration=self.iteration_count,
            mean_return_100=(
                float(np.mean(self.returns_100)) if self.returns_100 else 0.0
            ),
            s_local_mean=float(np.mean([s.s_local for s in scores])) if scores else nan,
            s_global_mean=float(np.mean([s.s_global for s in scores])) if scores else nan,
            s_total_mean=float(np.mean([s.s_total for s in scores])) if scores else nan,
            buffer_len=len(self.buffer) if self.buffer is not None else 0,
            buffer_min_score=(
                self.buffer.min_score() if self.buffer is not None and len(self.buffer) else nan
            ),
            ppo_loss=ppo_stats["total_loss"] if ppo_stats else nan,
            bc_loss=float(np.mean(bc_losses)) if bc_losses else nan,
            episodes_done=len(completed),
        )
