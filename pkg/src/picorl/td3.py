"""Twin-delayed deterministic policy gradient.

A deterministic tanh-output actor scaled to the actuator range, twin
critics against a smoothed target action, and a delayed actor update.
Noise levels are expressed as fractions of the action scale so the same
config works across actuator ranges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import PolicyCheckpoint
from .kernels import Activation, Backend, DEFAULT_BACKEND
from .nn import Adam, Mlp, flatten_grads, polyak_update


@dataclass
class Td3Config:
    hidden_dims: tuple = (64, 64)
    activation: str = "relu"
    gamma: float = 0.99
    polyak: float = 0.99
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7
    batch_size: int = 100
    buffer_capacity: int = 10_000
    warmup_steps: int = 100
    # Standard deviations and clip radius as fractions of the action scale.
    explore_noise: float = 0.1
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2


class Td3Agent:
    """Deterministic actor with twin critics and delayed policy updates."""

    def __init__(self, obs_dim: int, action_dim: int, action_scale: float,
                 cfg: Td3Config, rng, dtype=np.float32,
                 backend: Backend = DEFAULT_BACKEND):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.action_scale = float(action_scale)
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        act = Activation[cfg.activation.upper()]

        self.actor = Mlp.init(obs_dim, cfg.hidden_dims, action_dim, rng.split(0),
                              activation=act, output_activation=Activation.TANH,
                              dtype=dtype, backend=backend)
        self.critic1 = Mlp.init(obs_dim + action_dim, cfg.hidden_dims, 1, rng.split(1),
                                activation=act, dtype=dtype, backend=backend)
        self.critic2 = Mlp.init(obs_dim + action_dim, cfg.hidden_dims, 1, rng.split(2),
                                activation=act, dtype=dtype, backend=backend)
        self.target_actor = self.actor.copy()
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        self._rng = rng.split(3)
        self._updates = 0

        adam = dict(lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
        self.actor_opt = Adam(self.actor.params(), **adam)
        self.critic1_opt = Adam(self.critic1.params(), **adam)
        self.critic2_opt = Adam(self.critic2.params(), **adam)

    def act_batch(self, obs: np.ndarray, deterministic: bool = True, rng=None) -> np.ndarray:
        """Policy actions in actuator units; noise added when not deterministic."""
        obs = np.asarray(obs, dtype=self.dtype)
        a = self.action_scale * self.actor.forward(obs)
        if deterministic:
            return a
        noise = rng.gaussian(a.size).reshape(a.shape) * (self.cfg.explore_noise * self.action_scale)
        return np.clip(a + noise, -self.action_scale, self.action_scale).astype(self.dtype)

    def explore_action(self, obs: np.ndarray, rng) -> np.ndarray:
        return self.act_batch(obs.reshape(1, -1), deterministic=False, rng=rng)[0]

    def export_policy(self) -> PolicyCheckpoint:
        """The actor net as-is; its tanh output plus scale metadata."""
        return PolicyCheckpoint.from_mlp(self.actor, action_scale=self.action_scale)

    def _actor_grads(self, obs: np.ndarray):
        """Output-side gradient of -mean(Q1(s, pi(s))).

        Ascends the first critic: its input gradient is chained through
        the action scaling into the actor net. Leaves training caches on
        the actor for a following actor.backward(d_out).
        """
        n = obs.shape[0]
        scale = self.action_scale
        a_raw = self.actor.forward(obs, training=True)
        sa_pi = np.concatenate([obs, scale * a_raw], axis=1)
        q1 = self.critic1.forward(sa_pi, training=True)
        d_q = np.full_like(q1, -1.0 / n)
        _, g_in = self.critic1.backward(d_q)
        g_a = g_in[:, self.obs_dim:]
        return (g_a * scale).astype(self.dtype), float(-np.mean(q1))

    def update(self, batch) -> dict[str, float]:
        """One critic step, plus an actor and target step every policy_delay."""
        cfg = self.cfg
        n = batch.obs.shape[0]
        scale = self.action_scale

        # Smoothed target action: clipped noise on the target policy.
        noise = self._rng.gaussian(n * self.action_dim).reshape(n, self.action_dim)
        noise = np.clip(noise * (cfg.target_noise * scale),
                        -cfg.target_noise_clip * scale, cfg.target_noise_clip * scale)
        next_a = scale * self.target_actor.forward(batch.next_obs)
        next_a = np.clip(next_a + noise, -scale, scale).astype(self.dtype)
        next_sa = np.concatenate([batch.next_obs, next_a], axis=1)
        q_next = np.minimum(self.target1.forward(next_sa), self.target2.forward(next_sa))[:, 0]
        y = (batch.rewards + cfg.gamma * (1.0 - batch.terminated) * q_next)
        y = y.astype(self.dtype)[:, None]

        sa = np.concatenate([batch.obs, batch.actions], axis=1)
        losses = {}
        for name, critic, opt in (("critic1", self.critic1, self.critic1_opt),
                                  ("critic2", self.critic2, self.critic2_opt)):
            q = critic.forward(sa, training=True)
            err = q - y
            grads, _ = critic.backward((2.0 / n) * err)
            opt.step(flatten_grads(grads))
            losses[name + "_loss"] = float(np.mean(err * err))

        if self._updates % cfg.policy_delay == 0:
            d_out, actor_loss = self._actor_grads(batch.obs)
            grads, _ = self.actor.backward(d_out)
            self.actor_opt.step(flatten_grads(grads))
            losses["actor_loss"] = actor_loss

            polyak_update(self.target_actor.params(), self.actor.params(), cfg.polyak)
            polyak_update(self.target1.params(), self.critic1.params(), cfg.polyak)
            polyak_update(self.target2.params(), self.critic2.params(), cfg.polyak)
        self._updates += 1
        return losses
