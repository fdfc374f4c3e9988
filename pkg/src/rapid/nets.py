"""Dense policy/value networks with hand-written reverse-mode gradients.

The fixed architecture is two tanh hidden layers of 64 units feeding a
linear head: one network for the policy (action logits, or the mean of a
diagonal Gaussian plus a learned state-independent log-std) and one for
the state value.  Parameters live in a flat dict of float64 arrays so the
optimizer, finite-difference checks and checkpointing can iterate them
uniformly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

HIDDEN = 64
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0

CHECKPOINT_VERSION = 1

_LOG_2PI = math.log(2.0 * math.pi)


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float = 1.0) -> np.ndarray:
    a = rng.standard_normal(shape)
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == shape else vt
    return gain * q


def init_params(
    rng: np.random.Generator,
    obs_dim: int,
    action_dim: int,
    continuous: bool = False,
    hidden: int = HIDDEN,
) -> dict[str, np.ndarray]:
    """Orthogonal weights (sqrt(2) hidden, 0.01 policy head, 1.0 value head)."""
    p: dict[str, np.ndarray] = {}
    for net, head_dim, head_gain in (("pi", action_dim, 0.01), ("vf", 1, 1.0)):
        p[f"{net}.w1"] = orthogonal(rng, (obs_dim, hidden), math.sqrt(2.0))
        p[f"{net}.b1"] = np.zeros(hidden)
        p[f"{net}.w2"] = orthogonal(rng, (hidden, hidden), math.sqrt(2.0))
        p[f"{net}.b2"] = np.zeros(hidden)
        p[f"{net}.w3"] = orthogonal(rng, (hidden, head_dim), head_gain)
        p[f"{net}.b3"] = np.zeros(head_dim)
    if continuous:
        p["log_std"] = np.zeros(action_dim)
    return p


@dataclass
class Forward:
    """Activations cached by ``forward`` for the backward pass."""

    x: np.ndarray
    pi_h1: np.ndarray
    pi_h2: np.ndarray
    head: np.ndarray  # logits or Gaussian mean, (B, A)
    vf_h1: np.ndarray | None
    vf_h2: np.ndarray | None
    value: np.ndarray | None  # (B,)


def forward(params: dict[str, np.ndarray], x: np.ndarray, policy_only: bool = False) -> Forward:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not math.isfinite(float(x.sum())):
        raise ValueError("non-finite values in network input")
    pi_h1 = np.tanh(x @ params["pi.w1"] + params["pi.b1"])
    pi_h2 = np.tanh(pi_h1 @ params["pi.w2"] + params["pi.b2"])
    head = pi_h2 @ params["pi.w3"] + params["pi.b3"]
    if policy_only:
        return Forward(x, pi_h1, pi_h2, head, None, None, None)
    vf_h1 = np.tanh(x @ params["vf.w1"] + params["vf.b1"])
    vf_h2 = np.tanh(vf_h1 @ params["vf.w2"] + params["vf.b2"])
    value = (vf_h2 @ params["vf.w3"] + params["vf.b3"])[:, 0]
    return Forward(x, pi_h1, pi_h2, head, vf_h1, vf_h2, value)


def backward(
    params: dict[str, np.ndarray],
    fwd: Forward,
    d_head: np.ndarray | None,
    d_value: np.ndarray | None,
) -> dict[str, np.ndarray]:
    """Exact gradients of a scalar loss given its head/value gradients."""
    grads: dict[str, np.ndarray] = {}

    def mlp_back(net: str, h1: np.ndarray, h2: np.ndarray, dout: np.ndarray) -> None:
        grads[f"{net}.w3"] = h2.T @ dout
        grads[f"{net}.b3"] = dout.sum(axis=0)
        dh2 = (dout @ params[f"{net}.w3"].T) * (1.0 - h2 * h2)
        grads[f"{net}.w2"] = h1.T @ dh2
        grads[f"{net}.b2"] = dh2.sum(axis=0)
        dh1 = (dh2 @ params[f"{net}.w2"].T) * (1.0 - h1 * h1)
        grads[f"{net}.w1"] = fwd.x.T @ dh1
        grads[f"{net}.b1"] = dh1.sum(axis=0)

    if d_head is not None:
        mlp_back("pi", fwd.pi_h1, fwd.pi_h2, np.asarray(d_head, dtype=float))
    if d_value is not None:
        mlp_back("vf", fwd.vf_h1, fwd.vf_h2, np.asarray(d_value, dtype=float).reshape(-1, 1))
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient for parameter {name!r}")
    return grads


class Adam:
    """Bias-corrected Adam over a parameter dict, updating in place."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self._scratch = {k: np.empty_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        inv_sqrt_c2 = 1.0 / math.sqrt(c2)
        for k, g in grads.items():
            if g.shape != params[k].shape:
                raise ValueError(f"gradient shape mismatch for {k!r}")
            m = self.m[k]
            v = self.v[k]
            s = self._scratch[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            np.sqrt(v, out=s)
            s *= inv_sqrt_c2
            s += self.eps
            np.divide(m, s, out=s)
            s *= self.lr / c1
            params[k] -= s


# ---------------------------------------------------------------------------
# action distributions


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class Categorical:
    logits: np.ndarray  # (B, K)

    def log_probs(self) -> np.ndarray:
        return log_softmax(self.logits)

    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs())

    def log_prob(self, actions: np.ndarray) -> np.ndarray:
        actions = np.asarray(actions, dtype=int)
        k = self.logits.shape[-1]
        if actions.min() < 0 or actions.max() >= k:
            raise ValueError(f"action out of range [0, {k})")
        return self.log_probs()[np.arange(len(actions)), actions]

    def entropy(self) -> np.ndarray:
        lp = self.log_probs()
        return -(np.exp(lp) * lp).sum(axis=-1)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        cdf = self.probs().cumsum(axis=-1)
        u = rng.random(self.logits.shape[0])
        return (cdf > u[:, None]).argmax(axis=-1)

    def greedy(self) -> np.ndarray:
        return self.logits.argmax(axis=-1)


@dataclass
class DiagGaussian:
    mean: np.ndarray  # (B, A)
    log_std: np.ndarray  # (A,), clamped on read

    def clamped_log_std(self) -> np.ndarray:
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def log_prob(self, actions: np.ndarray) -> np.ndarray:
        actions = np.asarray(actions, dtype=float)
        if actions.shape != self.mean.shape:
            raise ValueError("action shape does not match distribution")
        ls = self.clamped_log_std()
        z = (actions - self.mean) / np.exp(ls)
        return (-0.5 * z * z - ls - 0.5 * _LOG_2PI).sum(axis=-1)

    def entropy(self) -> np.ndarray:
        ls = self.clamped_log_std()
        per_dim = ls + 0.5 * (1.0 + _LOG_2PI)
        return np.full(self.mean.shape[0], per_dim.sum())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + np.exp(self.clamped_log_std()) * rng.standard_normal(self.mean.shape)

    def greedy(self) -> np.ndarray:
        return self.mean


def make_dist(params: dict[str, np.ndarray], head: np.ndarray, continuous: bool):
    if continuous:
        return DiagGaussian(head, params["log_std"])
    return Categorical(head)


# ---------------------------------------------------------------------------
# checkpointing


def save_checkpoint(path, params: dict[str, np.ndarray], adam: Adam | None, meta: dict) -> None:
    """Write a versioned binary blob; loading restores it bit-exactly."""
    blobs: dict[str, np.ndarray] = {"__version": np.array(CHECKPOINT_VERSION)}
    blobs["__meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    for k, v in params.items():
        blobs[f"p:{k}"] = v
    if adam is not None:
        blobs["__adam"] = np.array([adam.t, adam.lr, adam.beta1, adam.beta2, adam.eps])
        for k in params:
            blobs[f"m:{k}"] = adam.m[k]
            blobs[f"v:{k}"] = adam.v[k]
    if hasattr(path, "write"):
        np.savez(path, **blobs)
    else:
        with open(path, "wb") as fh:
            np.savez(fh, **blobs)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], Adam | None, dict]:
    with np.load(path) as data:
        version = int(data["__version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        meta = json.loads(bytes(data["__meta"]).decode())
        params = {k[2:]: data[k].copy() for k in data.files if k.startswith("p:")}
        adam = None
        if "__adam" in data.files:
            t, lr, b1, b2, eps = data["__adam"]
            adam = Adam(params, lr=float(lr), beta1=float(b1), beta2=float(b2), eps=float(eps))
            adam.t = int(t)
            adam.m = {k[2:]: data[k].copy() for k in data.files if k.startswith("m:")}
            adam.v = {k[2:]: data[k].copy() for k in data.files if k.startswith("v:")}
    return params, adam, meta
