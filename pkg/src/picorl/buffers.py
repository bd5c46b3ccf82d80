"""Experience storage and advantage estimation.

The replay buffer is a fixed-capacity ring over preallocated arrays with
uniform with-replacement sampling. The rollout buffer stores fixed-size
on-policy segments for several environments in lockstep and computes
lambda-weighted advantages over them. Episode ends are tracked with two
flags: ``terminated`` stops value bootstrapping, ``truncated`` ends the
episode for the recursion but still bootstraps through the critic's
value of the state the episode was cut at.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    terminated: bool


class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    terminated: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform with-replacement sampling."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, dtype=np.float32):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.actions = np.zeros((capacity, action_dim), dtype=dtype)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.terminated = np.zeros(capacity, dtype=dtype)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        """Insert one transition, overwriting the oldest once full."""
        i = self._pos
        self.obs[i] = t.obs
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_obs[i] = t.next_obs
        self.terminated[i] = float(t.terminated)
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng) -> Batch:
        """Uniform with-replacement sample; requires at least one element."""
        if self.size < 1:
            raise ValueError("cannot sample from an empty buffer")
        idx = (rng.uniform(batch_size) * self.size).astype(np.int64)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx],
                     self.next_obs[idx], self.terminated[idx])


def gae_compute(rewards, values, value_bootstrap, terminated, truncated,
                gamma: float, lam: float, truncation_values=None):
    """Lambda-weighted advantage estimates and value targets.

    Works on the last axis, so inputs may be (T,) or (n_envs, T). For
    step t the one-step error is

        delta_t = r_t + gamma * v_next_t * (1 - terminated_t) - values_t

    with v_next_t = values[t+1] inside a segment, the critic value of
    the cut state (``truncation_values[t]``) at truncated steps, and
    ``value_bootstrap`` at the final step. The recursion

        A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}

    cuts at done = terminated or truncated, so no credit flows across
    episode boundaries. Returns (advantages, returns) in float64 with
    returns = advantages + values.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    term = np.asarray(terminated, dtype=np.float64)
    trunc = np.asarray(truncated, dtype=bool)
    if not (r.shape == v.shape == term.shape == trunc.shape):
        raise ValueError("rewards, values and flags must share a shape")
    horizon = r.shape[-1]
    if horizon == 0:
        raise ValueError("empty segment")

    v_next = np.empty_like(v)
    v_next[..., :-1] = v[..., 1:]
    v_next[..., -1] = np.asarray(value_bootstrap, dtype=np.float64)
    if trunc.any():
        if truncation_values is None:
            raise ValueError("truncated steps need truncation_values")
        tv = np.asarray(truncation_values, dtype=np.float64)
        if tv.shape != r.shape:
            raise ValueError("truncation_values must match the segment shape")
        v_next = np.where(trunc, tv, v_next)

    delta = r + gamma * v_next * (1.0 - term) - v
    not_done = 1.0 - np.maximum(term, trunc.astype(np.float64))

    adv = np.empty_like(delta)
    carry = np.zeros_like(delta[..., 0])
    for t in range(horizon - 1, -1, -1):
        carry = delta[..., t] + gamma * lam * not_done[..., t] * carry
        adv[..., t] = carry
    return adv, adv + v


def advantage_normalize(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Shift to zero mean, scale by population std plus eps."""
    a = np.asarray(adv)
    if a.size < 2:
        raise ValueError("need at least two values to normalize")
    return (a - a.mean()) / (a.std() + eps)


class RolloutBuffer:
    """On-policy storage for n_envs synchronized environments.

    Columns are written one step at a time; ``finalize`` computes
    advantages and returns for the filled prefix, after which ``flat``
    exposes everything as (n_envs * steps, ...) arrays.
    """

    def __init__(self, n_envs: int, horizon: int, obs_dim: int, action_dim: int,
                 dtype=np.float32):
        self.n_envs = n_envs
        self.horizon = horizon
        self.obs = np.zeros((n_envs, horizon, obs_dim), dtype=dtype)
        self.actions = np.zeros((n_envs, horizon, action_dim), dtype=dtype)
        self.log_probs = np.zeros((n_envs, horizon), dtype=np.float64)
        self.values = np.zeros((n_envs, horizon), dtype=np.float64)
        self.rewards = np.zeros((n_envs, horizon), dtype=np.float64)
        self.terminated = np.zeros((n_envs, horizon), dtype=bool)
        self.truncated = np.zeros((n_envs, horizon), dtype=bool)
        self.truncation_values = np.zeros((n_envs, horizon), dtype=np.float64)
        self.pos = 0
        self.advantages: np.ndarray | None = None
        self.returns: np.ndarray | None = None

    def add(self, obs, actions, log_probs, values, rewards, terminated, truncated) -> None:
        """Append one synchronized step across all environments."""
        if self.pos >= self.horizon:
            raise ValueError("rollout buffer is full")
        t = self.pos
        self.obs[:, t] = obs
        self.actions[:, t] = actions
        self.log_probs[:, t] = log_probs
        self.values[:, t] = values
        self.rewards[:, t] = rewards
        self.terminated[:, t] = terminated
        self.truncated[:, t] = truncated
        self.pos = t + 1

    def set_truncation_value(self, env: int, value: float) -> None:
        """Record the critic value of the state the last step cut at."""
        self.truncation_values[env, self.pos - 1] = value

    def finalize(self, value_bootstrap: np.ndarray, gamma: float, lam: float) -> None:
        t = self.pos
        self.advantages, self.returns = gae_compute(
            self.rewards[:, :t], self.values[:, :t], value_bootstrap,
            self.terminated[:, :t], self.truncated[:, :t], gamma, lam,
            self.truncation_values[:, :t])

    def flat(self) -> dict[str, np.ndarray]:
        """Flattened views of the filled prefix; requires finalize first."""
        if self.advantages is None:
            raise RuntimeError("finalize before flattening")
        t = self.pos
        n = self.n_envs * t
        return {
            "obs": self.obs[:, :t].reshape(n, -1),
            "actions": self.actions[:, :t].reshape(n, -1),
            "log_probs": self.log_probs[:, :t].reshape(n),
            "values": self.values[:, :t].reshape(n),
            "advantages": self.advantages.reshape(n),
            "returns": self.returns.reshape(n),
        }

    def reset(self) -> None:
        self.pos = 0
        self.advantages = None
        self.returns = None
