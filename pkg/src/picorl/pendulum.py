"""Pendulum swing-up: a single underactuated joint driven to the top.

Physics and reward follow the standard Gymnasium convention: gravity 10,
unit mass and length, Euler integration at dt = 0.05, torque clipped to
[-2, 2], angular velocity clipped to [-8, 8]. The running cost is
``angle^2 + 0.1 * vel^2 + 0.001 * torque^2`` evaluated on the state the
torque was applied to, with the angle wrapped into [-pi, pi). Episodes
never terminate; they truncate after 200 steps. Observations are
(cos theta, sin theta, theta_dot).

Besides the scalar environment there are vectorized helpers that step
many independent pendulums in lockstep, used for batched evaluation;
they perform the identical arithmetic on arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
DT = 0.05
MAX_TORQUE = 2.0
MAX_SPEED = 8.0
EPISODE_STEPS = 200

OBS_DIM = 3
ACTION_DIM = 1


def angle_normalize(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return ((theta + math.pi) % (2.0 * math.pi)) - math.pi


@dataclass
class PendulumState:
    theta: float
    theta_dot: float
    step_count: int = 0


@dataclass
class EnvStepResult:
    state: PendulumState
    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


def _obs(theta: float, theta_dot: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta), theta_dot])


def pendulum_reset(rng) -> PendulumState:
    """Draw theta ~ U(-pi, pi), theta_dot ~ U(-1, 1); step count zero."""
    u = rng.uniform(2)
    return PendulumState(-math.pi + 2.0 * math.pi * u[0], -1.0 + 2.0 * u[1], 0)


def pendulum_step(state: PendulumState, torque: float) -> EnvStepResult:
    """Apply one torque; reward is the negated cost of the pre-step state."""
    u = min(max(float(torque), -MAX_TORQUE), MAX_TORQUE)
    th, thdot = state.theta, state.theta_dot
    cost = angle_normalize(th) ** 2 + 0.1 * thdot**2 + 0.001 * u * u
    # thdot' = thdot + (3g/(2l) sin th + 3/(m l^2) u) dt
    new_thdot = thdot + (1.5 * GRAVITY / LENGTH * math.sin(th)
                         + 3.0 / (MASS * LENGTH**2) * u) * DT
    new_thdot = min(max(new_thdot, -MAX_SPEED), MAX_SPEED)
    new_th = th + new_thdot * DT
    count = state.step_count + 1
    new_state = PendulumState(new_th, new_thdot, count)
    return EnvStepResult(new_state, _obs(new_th, new_thdot), -cost,
                         False, count >= EPISODE_STEPS)


class PendulumEnv:
    """Stateful wrapper around the pure step function for training loops."""

    observation_dim = OBS_DIM
    action_dim = ACTION_DIM
    action_scale = MAX_TORQUE

    def __init__(self):
        self.state: PendulumState | None = None

    def reset(self, rng) -> np.ndarray:
        self.state = pendulum_reset(rng)
        return _obs(self.state.theta, self.state.theta_dot)

    def step(self, torque: float) -> EnvStepResult:
        if self.state is None:
            raise RuntimeError("step before reset")
        result = pendulum_step(self.state, torque)
        self.state = result.state
        return result


def reset_batch(rng, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n independent resets consuming the rng like n sequential resets."""
    u = rng.uniform(2 * n)
    return -math.pi + 2.0 * math.pi * u[0::2], -1.0 + 2.0 * u[1::2]


def step_batch(theta: np.ndarray, theta_dot: np.ndarray, torque: np.ndarray):
    """Vectorized step over independent pendulums.

    Returns (theta', theta_dot', reward) arrays; same arithmetic as
    pendulum_step applied elementwise.
    """
    u = np.clip(torque, -MAX_TORQUE, MAX_TORQUE)
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    cost = wrapped**2 + 0.1 * theta_dot**2 + 0.001 * u * u
    new_thdot = theta_dot + (1.5 * GRAVITY / LENGTH * np.sin(theta)
                             + 3.0 / (MASS * LENGTH**2) * u) * DT
    new_thdot = np.clip(new_thdot, -MAX_SPEED, MAX_SPEED)
    new_theta = theta + new_thdot * DT
    return new_theta, new_thdot, -cost


def obs_batch(theta: np.ndarray, theta_dot: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Stack (cos theta, sin theta, theta_dot) columns for a batch."""
    if out is None:
        out = np.empty((theta.shape[0], OBS_DIM))
    np.cos(theta, out=out[:, 0])
    np.sin(theta, out=out[:, 1])
    out[:, 2] = theta_dot
    return out
