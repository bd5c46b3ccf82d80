"""Proximal policy optimization with a clipped surrogate objective.

The actor is an unsquashed diagonal Gaussian: the net outputs the mean,
a free state-independent log-std vector is learned alongside it, and the
environment clips actions to the actuator range. Advantages come from
the rollout buffer and are normalized per minibatch. The surrogate
gradient is exact: samples where the clipped branch is active contribute
nothing, everything else contributes -ratio * advantage / n through the
log-density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .buffers import RolloutBuffer, advantage_normalize
from .checkpoint import PolicyCheckpoint
from .distributions import gaussian_logprob
from .kernels import Activation, Backend, DEFAULT_BACKEND
from .nn import Adam, Mlp, flatten_grads


@dataclass
class PpoConfig:
    hidden_dims: tuple = (64, 64)
    activation: str = "relu"
    gamma: float = 0.9
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    epochs: int = 2
    minibatch_size: int = 256
    n_envs: int = 4
    horizon: int = 1024
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    normalize_advantage: bool = True
    log_std_init: float = 0.0


class PpoAgent:
    """Gaussian policy net, learned log-std vector, and a value net."""

    def __init__(self, obs_dim: int, action_dim: int, action_scale: float,
                 cfg: PpoConfig, rng, dtype=np.float32,
                 backend: Backend = DEFAULT_BACKEND):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.action_scale = float(action_scale)
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        act = Activation[cfg.activation.upper()]

        self.actor = Mlp.init(obs_dim, cfg.hidden_dims, action_dim, rng.split(0),
                              activation=act, dtype=dtype, backend=backend)
        self.critic = Mlp.init(obs_dim, cfg.hidden_dims, 1, rng.split(1),
                               activation=act, dtype=dtype, backend=backend)
        self.log_std = np.full(action_dim, cfg.log_std_init, dtype=dtype)

        adam = dict(lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
        self.actor_opt = Adam(self.actor.params() + [self.log_std], **adam)
        self.critic_opt = Adam(self.critic.params(), **adam)

    def act_batch(self, obs: np.ndarray, deterministic: bool = True, rng=None) -> np.ndarray:
        obs = np.asarray(obs, dtype=self.dtype)
        mean = self.actor.forward(obs)
        if deterministic:
            return mean
        return self.sample_actions(obs, rng)[0]

    def sample_actions(self, obs: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
        """Stochastic actions and their log-probabilities for collection."""
        obs = np.asarray(obs, dtype=self.dtype)
        mean = self.actor.forward(obs)
        eps = rng.gaussian(mean.size).reshape(mean.shape).astype(self.dtype)
        actions = mean + np.exp(self.log_std) * eps
        return actions, gaussian_logprob(actions, mean, self.log_std)

    def values(self, obs: np.ndarray) -> np.ndarray:
        return self.critic.forward(np.asarray(obs, dtype=self.dtype))[:, 0]

    def export_policy(self) -> PolicyCheckpoint:
        """Mean network only; consumers clip to the actuator range."""
        return PolicyCheckpoint.from_mlp(self.actor)

    def _policy_grads(self, obs: np.ndarray, actions: np.ndarray,
                      old_logp: np.ndarray, adv: np.ndarray):
        """Gradient of the clipped surrogate for one minibatch.

        Leaves training caches on the actor; returns (d_mean, d_log_std,
        stats) where d_mean is the gradient with respect to the net output
        and d_log_std with respect to the free log-std vector.
        """
        cfg = self.cfg
        n = obs.shape[0]
        mean = self.actor.forward(obs, training=True)
        std = np.exp(self.log_std.astype(np.float64))
        z = (actions - mean) / std
        logp = gaussian_logprob(actions, mean, self.log_std)
        ratio = np.exp(logp - old_logp)
        clipped_ratio = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)

        # min(r * A, clip(r) * A): gradient flows only through samples
        # where the unclipped branch attains the min.
        clipped_out = (((adv > 0) & (ratio > 1.0 + cfg.clip_ratio))
                       | ((adv < 0) & (ratio < 1.0 - cfg.clip_ratio)))
        coeff = np.where(clipped_out, 0.0, -(1.0 / n) * ratio * adv)
        d_mean = coeff[:, None] * (z / std)
        d_log_std = (coeff[:, None] * (z * z - 1.0)).sum(axis=0)
        d_log_std -= cfg.entropy_coef
        stats = {
            "policy_loss": -float(np.mean(np.minimum(ratio * adv, clipped_ratio * adv))),
            "clip_fraction": float(np.mean(clipped_out)),
        }
        return d_mean, d_log_std, stats

    def update(self, rollout: RolloutBuffer, rng) -> dict[str, float]:
        """Several epochs of shuffled minibatch steps over one rollout."""
        cfg = self.cfg
        data = rollout.flat()
        total = data["obs"].shape[0]
        policy_losses, value_losses, clip_fracs = [], [], []

        for _ in range(cfg.epochs):
            perm = np.argsort(rng.uniform(total))
            for start in range(0, total, cfg.minibatch_size):
                sel = perm[start:start + cfg.minibatch_size]
                # A singleton tail cannot be advantage-normalized.
                if sel.size < 2:
                    continue
                n = sel.size
                obs = data["obs"][sel]
                actions = data["actions"][sel]
                old_logp = data["log_probs"][sel]
                adv = data["advantages"][sel]
                if cfg.normalize_advantage:
                    adv = advantage_normalize(adv)

                d_mean, d_log_std, stats = self._policy_grads(obs, actions, old_logp, adv)
                grads, _ = self.actor.backward(d_mean.astype(self.dtype))
                self.actor_opt.step(flatten_grads(grads) + [d_log_std.astype(self.dtype)])

                v = self.critic.forward(obs, training=True)
                v_err = v[:, 0] - data["returns"][sel]
                d_v = (cfg.value_coef * 2.0 / n) * v_err
                grads, _ = self.critic.backward(d_v[:, None].astype(self.dtype))
                self.critic_opt.step(flatten_grads(grads))

                policy_losses.append(stats["policy_loss"])
                value_losses.append(float(np.mean(v_err * v_err)))
                clip_fracs.append(stats["clip_fraction"])

        return {
            "policy_loss": float(np.mean(policy_losses)),
            "value_loss": float(np.mean(value_losses)),
            "clip_fraction": float(np.mean(clip_fracs)),
            "log_std": float(self.log_std[0]),
        }
