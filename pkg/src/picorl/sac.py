"""Soft actor-critic with a learned temperature.

The actor net outputs mean and log-std for a tanh-squashed Gaussian;
twin critics score (obs, action) pairs and slow-moving target copies
stabilize the bootstrap. The temperature alpha is learned in log space
against a target entropy. All gradients are written out by hand against
the reparameterized sample a = scale * tanh(mean + std * eps), which
keeps the whole update inside the fixed-shape kernel stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import PolicyCheckpoint
from .distributions import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    SQUASH_EPS,
    gaussian_logprob,
    squashed_gaussian_sample,
    squashed_mean_action,
)
from .kernels import Activation, Backend, DEFAULT_BACKEND
from .nn import Adam, DenseLayer, Mlp, flatten_grads, polyak_update


@dataclass
class SacConfig:
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
    alpha_init: float = 0.5
    # None resolves to -action_dim.
    target_entropy: float | None = None


class SacAgent:
    """Actor, twin critics with targets, and the temperature parameter."""

    def __init__(self, obs_dim: int, action_dim: int, action_scale: float,
                 cfg: SacConfig, rng, dtype=np.float32,
                 backend: Backend = DEFAULT_BACKEND):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.action_scale = float(action_scale)
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        act = Activation[cfg.activation.upper()]

        self.actor = Mlp.init(obs_dim, cfg.hidden_dims, 2 * action_dim, rng.split(0),
                              activation=act, dtype=dtype, backend=backend)
        self.critic1 = Mlp.init(obs_dim + action_dim, cfg.hidden_dims, 1, rng.split(1),
                                activation=act, dtype=dtype, backend=backend)
        self.critic2 = Mlp.init(obs_dim + action_dim, cfg.hidden_dims, 1, rng.split(2),
                                activation=act, dtype=dtype, backend=backend)
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        self._rng = rng.split(3)

        self.log_alpha = np.array([np.log(cfg.alpha_init)], dtype=np.float64)
        self.target_entropy = (-float(action_dim) if cfg.target_entropy is None
                               else float(cfg.target_entropy))

        adam = dict(lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
        self.actor_opt = Adam(self.actor.params(), **adam)
        self.critic1_opt = Adam(self.critic1.params(), **adam)
        self.critic2_opt = Adam(self.critic2.params(), **adam)
        self.alpha_opt = Adam([self.log_alpha], **adam)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def _policy_params(self, obs: np.ndarray, training: bool = False):
        out = self.actor.forward(obs, training=training)
        a = self.action_dim
        return out[:, :a], out[:, a:]

    def act_batch(self, obs: np.ndarray, deterministic: bool = True, rng=None) -> np.ndarray:
        """Actions in actuator units for a batch of observations."""
        obs = np.asarray(obs, dtype=self.dtype)
        mean, log_std = self._policy_params(obs)
        if deterministic:
            return squashed_mean_action(mean, self.action_scale)
        return squashed_gaussian_sample(mean, log_std, rng, self.action_scale).action

    def explore_action(self, obs: np.ndarray, rng) -> np.ndarray:
        """One stochastic action for a single observation."""
        return self.act_batch(obs.reshape(1, -1), deterministic=False, rng=rng)[0]

    def export_policy(self) -> PolicyCheckpoint:
        """Deterministic policy head as a standalone net.

        The mean columns of the output layer are sliced out and the tanh
        squash plus actuator scaling become the net's final activation
        and scale metadata, so a consumer just runs the net.
        """
        a = self.action_dim
        layers = [DenseLayer(l.w.copy(), l.b.copy(), l.act) for l in self.actor.layers[:-1]]
        last = self.actor.layers[-1]
        layers.append(DenseLayer(last.w[:, :a].copy(), last.b[:a].copy(), Activation.TANH))
        return PolicyCheckpoint.from_mlp(Mlp(layers, self.actor.backend),
                                         action_scale=self.action_scale)

    def _actor_grads(self, obs: np.ndarray, eps: np.ndarray):
        """Output-side gradient of mean(alpha log pi - min Q) at fixed noise.

        Leaves training caches on the actor, so a following
        actor.backward(d_out) yields the parameter gradients. Returns
        (d_out, log_prob, loss) with d_out laid out as [d_mean, d_log_std].
        """
        n = obs.shape[0]
        scale = self.action_scale
        alpha = self.alpha
        # dQ/da is taken from the per-sample smaller critic via an input
        # gradient through concatenated (obs, action) columns.
        mean, log_std_raw = self._policy_params(obs, training=True)
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        in_band = ((log_std_raw >= LOG_STD_MIN) & (log_std_raw <= LOG_STD_MAX)).astype(self.dtype)
        std = np.exp(log_std)
        u = mean + std * eps
        t = np.tanh(u)
        a_pi = scale * t
        log_prob = (gaussian_logprob(u, mean, log_std)
                    - (np.log(1.0 - t * t + SQUASH_EPS) + np.log(scale)).sum(axis=-1))

        sa_pi = np.concatenate([obs, a_pi], axis=1)
        q1 = self.critic1.forward(sa_pi, training=True)
        q2 = self.critic2.forward(sa_pi, training=True)
        pick1 = (q1 <= q2).astype(self.dtype)
        _, g_in1 = self.critic1.backward(-(1.0 / n) * pick1)
        _, g_in2 = self.critic2.backward(-(1.0 / n) * (1.0 - pick1))
        # Gradient of -mean(min Q) with respect to the sampled action.
        g_a = (g_in1 + g_in2)[:, self.obs_dim:]

        one_m_t2 = 1.0 - t * t
        # d log pi / du contributed by the squash correction; the Gaussian
        # term is flat in mean at fixed eps.
        dsq = 2.0 * t * one_m_t2 / (one_m_t2 + SQUASH_EPS)
        da_du = scale * one_m_t2
        sig_eps = std * eps
        d_mean = (alpha / n) * dsq + g_a * da_du
        d_log_std = ((alpha / n) * (dsq * sig_eps - 1.0) + g_a * da_du * sig_eps) * in_band
        d_out = np.concatenate([d_mean, d_log_std], axis=1).astype(self.dtype)
        loss = float(np.mean(alpha * log_prob - np.minimum(q1, q2)[:, 0]))
        return d_out, log_prob, loss

    def update(self, batch) -> dict[str, float]:
        """One gradient step on critics, actor and temperature from a batch."""
        cfg = self.cfg
        obs = batch.obs
        actions = batch.actions
        n = obs.shape[0]
        scale = self.action_scale
        alpha = self.alpha

        # Bootstrapped target with entropy bonus from a fresh next-state sample.
        next_mean, next_log_std = self._policy_params(batch.next_obs)
        nxt = squashed_gaussian_sample(next_mean, next_log_std, self._rng, scale)
        next_sa = np.concatenate([batch.next_obs, nxt.action], axis=1)
        q_next = np.minimum(self.target1.forward(next_sa), self.target2.forward(next_sa))[:, 0]
        q_next = q_next - alpha * nxt.log_prob
        y = (batch.rewards + cfg.gamma * (1.0 - batch.terminated) * q_next)
        y = y.astype(self.dtype)[:, None]

        sa = np.concatenate([obs, actions], axis=1)
        losses = {}
        for name, critic, opt in (("critic1", self.critic1, self.critic1_opt),
                                  ("critic2", self.critic2, self.critic2_opt)):
            q = critic.forward(sa, training=True)
            err = q - y
            grads, _ = critic.backward((2.0 / n) * err)
            opt.step(flatten_grads(grads))
            losses[name + "_loss"] = float(np.mean(err * err))

        eps = self._rng.gaussian(n * self.action_dim).reshape(n, self.action_dim)
        d_out, log_prob, actor_loss = self._actor_grads(obs, eps.astype(self.dtype))
        grads, _ = self.actor.backward(d_out)
        self.actor_opt.step(flatten_grads(grads))
        losses["actor_loss"] = actor_loss

        # Temperature: descend log_alpha * mean(-log pi - target_entropy)
        # with the log-probs treated as constants.
        ent_err = float(np.mean(-log_prob - self.target_entropy))
        self.alpha_opt.step([np.array([ent_err])])
        losses["alpha_loss"] = float(self.log_alpha[0] * ent_err)
        losses["alpha"] = self.alpha

        polyak_update(self.target1.params(), self.critic1.params(), cfg.polyak)
        polyak_update(self.target2.params(), self.critic2.params(), cfg.polyak)
        return losses
