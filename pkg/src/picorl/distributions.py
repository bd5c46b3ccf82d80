"""Policy distributions: diagonal Gaussians, optionally tanh-squashed.

The squashed family samples u ~ N(mean, std^2) elementwise, maps it
through tanh and scales to the actuator range. Its log-density accounts
for the change of variables:

    log pi(a) = log N(u) - sum log(1 - tanh(u)^2 + 1e-6) - sum log scale

with the small constant keeping the correction finite at saturation.
Log standard deviations are clamped to [-20, 2] before use.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6

_LOG_2PI = float(np.log(2.0 * np.pi))


def gaussian_logprob(x: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density, summed over the last axis."""
    z = (x - mean) / np.exp(log_std)
    per_dim = -0.5 * z * z - log_std - 0.5 * _LOG_2PI
    return per_dim.sum(axis=-1)


class SquashedSample(NamedTuple):
    action: np.ndarray
    log_prob: np.ndarray
    u: np.ndarray
    eps: np.ndarray


def squashed_gaussian_sample(mean: np.ndarray, log_std: np.ndarray, rng,
                             scale: float = 1.0) -> SquashedSample:
    """Reparameterized draw a = scale * tanh(mean + std * eps).

    Returns the pre-squash value u and the noise eps alongside the
    action and its log-probability so callers can push gradients back
    through the same draw.
    """
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    eps = rng.gaussian(mean.size).reshape(mean.shape).astype(mean.dtype)
    u = mean + np.exp(log_std) * eps
    action = np.tanh(u)
    log_prob = squashed_logprob_from_u(u, mean, log_std, scale)
    return SquashedSample(scale * action, log_prob, u, eps)


def squashed_logprob_from_u(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray,
                            scale: float = 1.0) -> np.ndarray:
    """log pi of the action tanh(u) * scale given its pre-squash value."""
    t = np.tanh(u)
    correction = np.log(1.0 - t * t + SQUASH_EPS) + np.log(scale)
    return gaussian_logprob(u, mean, log_std) - correction.sum(axis=-1)


def squashed_mean_action(mean: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Deterministic head of the squashed policy: scale * tanh(mean)."""
    return scale * np.tanh(mean)
