"""Training loops, evaluation protocol, and run records.

A run is fully described by a TrainRunConfig: algorithm, environment,
seed, step budget, backend, and the algorithm's own hyperparameters.
Given the same config twice, ``train`` produces bit-identical results;
all randomness flows from one seed through fixed split indices (env
resets, agent init, exploration, sampling, evaluation).

Evaluation freezes the policy and rolls out deterministic-action
episodes in lockstep batches; scores are aggregated with the
inter-quantile mean, dropping the strict bottom and top 5% by rank.
Wall-clock accounting separates training time from evaluation time.
"""

from __future__ import annotations

import math
import time
import types
import typing
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from . import pendulum
from .buffers import ReplayBuffer, RolloutBuffer, Transition
from .checkpoint import PolicyCheckpoint
from .kernels import Backend
from .ppo import PpoAgent, PpoConfig
from .rng import Prng
from .sac import SacAgent, SacConfig
from .td3 import Td3Agent, Td3Config

_DTYPES = {"f32": np.float32, "f64": np.float64}

# (obs_dim, action_dim, action_scale) per environment tag.
_ENV_SPECS = {"pendulum": (pendulum.OBS_DIM, pendulum.ACTION_DIM, pendulum.MAX_TORQUE)}

_ALGO_CONFIGS = {"sac": SacConfig, "td3": Td3Config, "ppo": PpoConfig}
_ALGO_AGENTS = {"sac": SacAgent, "td3": Td3Agent, "ppo": PpoAgent}
_TOTAL_STEPS_DEFAULT = {"sac": 10_000, "td3": 10_000, "ppo": 300_000}
_EVAL_INTERVAL_DEFAULT = {"sac": 1_000, "td3": 1_000}


class IqmStats(NamedTuple):
    mean: float
    std: float
    kept: np.ndarray


def iqm(values, lower: float = 0.05, upper: float = 0.95) -> IqmStats:
    """Inter-quantile mean: drop the strict bottom and top tails by rank.

    With n sorted values, ranks at or below ceil(lower * n) and at or
    above floor(upper * n) + 1 are discarded; mean and population std
    are computed over the kept set. If the band is empty (tiny n), all
    values are kept, so a singleton just reports itself.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = v.size
    if n == 0:
        raise ValueError("iqm of an empty set")
    lo = math.ceil(lower * n)
    hi = math.floor(upper * n) + 1
    kept = v[lo:hi - 1]
    if kept.size == 0:
        kept = v
    return IqmStats(float(kept.mean()), float(kept.std()), kept)


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _parse_value(text: str, typ):
    origin = typing.get_origin(typ)
    if origin in (typing.Union, types.UnionType):
        if text.lower() == "none":
            return None
        inner = [a for a in typing.get_args(typ) if a is not type(None)]
        return _parse_value(text, inner[0])
    if typ is bool:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ is int:
        return int(text)
    if typ is float:
        return float(text)
    if typ is tuple:
        return tuple(int(p) for p in text.split(",") if p.strip())
    return text


@dataclass
class TrainRunConfig:
    """Everything that determines a run; flat key=value serializable."""

    algo: str = "sac"
    env: str = "pendulum"
    seed: int = 0
    total_steps: int | None = None
    eval_interval: int | None = None
    eval_episodes: int = 100
    backend: str = "fused"
    dtype: str = "f32"
    algo_config: object = None

    def __post_init__(self):
        if self.algo not in _ALGO_CONFIGS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.env not in _ENV_SPECS:
            raise ValueError(f"unknown environment {self.env!r}")
        if self.backend not in ("generic", "fused"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.dtype not in _DTYPES:
            raise ValueError(f"unknown dtype {self.dtype!r}")
        if self.algo_config is None:
            self.algo_config = _ALGO_CONFIGS[self.algo]()
        elif not isinstance(self.algo_config, _ALGO_CONFIGS[self.algo]):
            raise ValueError(f"algo_config does not match algorithm {self.algo!r}")

    def resolved_total_steps(self) -> int:
        return _TOTAL_STEPS_DEFAULT[self.algo] if self.total_steps is None else self.total_steps

    def resolved_eval_interval(self) -> int:
        if self.eval_interval is not None:
            return self.eval_interval
        if self.algo == "ppo":
            # Default cadence: once per full rollout.
            return self.algo_config.n_envs * self.algo_config.horizon
        return _EVAL_INTERVAL_DEFAULT[self.algo]

    def to_flat(self, resolved: bool = False) -> dict[str, str]:
        """Flat key=value view; ``resolved`` fills in computed defaults."""
        out = {}
        for f in fields(self):
            if f.name == "algo_config":
                continue
            out[f.name] = _format_value(getattr(self, f.name))
        if resolved:
            out["total_steps"] = str(self.resolved_total_steps())
            out["eval_interval"] = str(self.resolved_eval_interval())
        for f in fields(self.algo_config):
            out[f.name] = _format_value(getattr(self.algo_config, f.name))
        return out

    @classmethod
    def from_flat(cls, flat: dict[str, str]) -> "TrainRunConfig":
        """Inverse of to_flat; unknown keys are an error."""
        flat = dict(flat)
        algo = flat.get("algo", "sac")
        if algo not in _ALGO_CONFIGS:
            raise ValueError(f"unknown algorithm {algo!r}")
        acfg_cls = _ALGO_CONFIGS[algo]
        common_hints = typing.get_type_hints(cls)
        acfg_hints = typing.get_type_hints(acfg_cls)
        common_names = {f.name for f in fields(cls)} - {"algo_config"}
        acfg_names = {f.name for f in fields(acfg_cls)}
        common_kwargs, acfg_kwargs = {}, {}
        for key, text in flat.items():
            if key in common_names:
                common_kwargs[key] = _parse_value(text, common_hints[key])
            elif key in acfg_names:
                acfg_kwargs[key] = _parse_value(text, acfg_hints[key])
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**common_kwargs, algo_config=acfg_cls(**acfg_kwargs))

    def with_overrides(self, pairs) -> "TrainRunConfig":
        """Apply ``key=value`` strings on top of this config."""
        flat = self.to_flat()
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise ValueError(f"override {pair!r} is not of the form key=value")
            flat[key.strip()] = value.strip()
        return TrainRunConfig.from_flat(flat)


@dataclass
class EvalPoint:
    step: int
    returns: np.ndarray
    iqm_mean: float
    iqm_std: float


@dataclass
class RunRecord:
    """Everything a finished run leaves behind."""

    config: TrainRunConfig
    eval_points: list[EvalPoint]
    iterations: int
    train_seconds: float
    total_seconds: float
    checkpoint: PolicyCheckpoint
    final_losses: dict

    @property
    def final_iqm(self) -> float:
        return self.eval_points[-1].iqm_mean

    @property
    def final_returns(self) -> np.ndarray:
        return self.eval_points[-1].returns


def evaluate_policy(policy, env: str = "pendulum", episodes: int = 100,
                    rng=None, deterministic: bool = True) -> np.ndarray:
    """Total return of ``episodes`` fresh episodes; policy untouched.

    All episodes run in one lockstep batch (this environment always
    truncates at the same length), so the policy sees one (episodes,
    obs_dim) matrix per step. Returns the per-episode total rewards.
    """
    if env not in _ENV_SPECS:
        raise ValueError(f"unknown environment {env!r}")
    if episodes < 1:
        raise ValueError("need at least one episode")
    if rng is None:
        rng = Prng(0)
    theta, theta_dot = pendulum.reset_batch(rng, episodes)
    obs = pendulum.obs_batch(theta, theta_dot)
    returns = np.zeros(episodes)
    for _ in range(pendulum.EPISODE_STEPS):
        if deterministic:
            actions = policy.act_batch(obs, deterministic=True)
        else:
            actions = policy.act_batch(obs, deterministic=False, rng=rng)
        torque = np.asarray(actions, dtype=np.float64)[:, 0]
        theta, theta_dot, reward = pendulum.step_batch(theta, theta_dot, torque)
        returns += reward
        pendulum.obs_batch(theta, theta_dot, out=obs)
    return returns


def make_agent(cfg: TrainRunConfig, rng):
    obs_dim, action_dim, scale = _ENV_SPECS[cfg.env]
    return _ALGO_AGENTS[cfg.algo](obs_dim, action_dim, scale, cfg.algo_config, rng,
                                  dtype=_DTYPES[cfg.dtype], backend=Backend(cfg.backend))


def train(cfg: TrainRunConfig) -> RunRecord:
    """Run one seed to completion and return its record."""
    if cfg.algo == "ppo":
        return _train_ppo(cfg)
    return _train_off_policy(cfg)


def _train_off_policy(cfg: TrainRunConfig) -> RunRecord:
    acfg = cfg.algo_config
    total = cfg.resolved_total_steps()
    interval = cfg.resolved_eval_interval()
    _, action_dim, scale = _ENV_SPECS[cfg.env]
    dtype = _DTYPES[cfg.dtype]

    master = Prng(cfg.seed)
    env_rng = master.split(0)
    agent = make_agent(cfg, master.split(1))
    action_rng = master.split(2)
    sample_rng = master.split(3)
    eval_rng = master.split(4)

    env = pendulum.PendulumEnv()
    replay = ReplayBuffer(acfg.buffer_capacity, env.observation_dim, action_dim, dtype)

    eval_points: list[EvalPoint] = []

    def run_eval(step: int) -> None:
        returns = evaluate_policy(agent, cfg.env, cfg.eval_episodes, eval_rng)
        stats = iqm(returns)
        eval_points.append(EvalPoint(step, returns, stats.mean, stats.std))

    t_start = time.perf_counter()
    run_eval(0)
    train_seconds = 0.0
    mark = time.perf_counter()

    obs = env.reset(env_rng)
    losses: dict = {}
    updates = 0
    for step in range(1, total + 1):
        if step <= acfg.warmup_steps:
            action = (2.0 * action_rng.uniform(action_dim) - 1.0) * scale
        else:
            action = agent.explore_action(obs.astype(dtype), action_rng)
        result = env.step(float(action[0]))
        replay.push(Transition(obs, action, result.reward, result.obs, result.terminated))
        obs = env.reset(env_rng) if result.truncated else result.obs
        if step > acfg.warmup_steps:
            losses = agent.update(replay.sample(acfg.batch_size, sample_rng))
            updates += 1
        if (step // interval > (step - 1) // interval) or step == total:
            train_seconds += time.perf_counter() - mark
            run_eval(step)
            mark = time.perf_counter()

    train_seconds += time.perf_counter() - mark
    return RunRecord(cfg, eval_points, updates, train_seconds,
                     time.perf_counter() - t_start, agent.export_policy(), losses)


def _train_ppo(cfg: TrainRunConfig) -> RunRecord:
    acfg: PpoConfig = cfg.algo_config
    total = cfg.resolved_total_steps()
    interval = cfg.resolved_eval_interval()
    n = acfg.n_envs
    dtype = _DTYPES[cfg.dtype]

    master = Prng(cfg.seed)
    env_rng = master.split(0)
    env_rngs = [env_rng.split(i) for i in range(n)]
    agent = make_agent(cfg, master.split(1))
    action_rng = master.split(2)
    shuffle_rng = master.split(3)
    eval_rng = master.split(4)

    envs = [pendulum.PendulumEnv() for _ in range(n)]
    obs = np.stack([envs[i].reset(env_rngs[i]) for i in range(n)])
    rollout = RolloutBuffer(n, acfg.horizon, pendulum.OBS_DIM, pendulum.ACTION_DIM, dtype)

    eval_points: list[EvalPoint] = []

    def run_eval(step: int) -> None:
        returns = evaluate_policy(agent, cfg.env, cfg.eval_episodes, eval_rng)
        stats = iqm(returns)
        eval_points.append(EvalPoint(step, returns, stats.mean, stats.std))

    t_start = time.perf_counter()
    run_eval(0)
    train_seconds = 0.0
    mark = time.perf_counter()

    consumed = 0
    iterations = 0
    losses: dict = {}
    while consumed < total:
        horizon = min(acfg.horizon, math.ceil((total - consumed) / n))
        rollout.reset()
        rewards = np.empty(n)
        truncated = np.empty(n, dtype=bool)
        for _ in range(horizon):
            obs32 = obs.astype(dtype)
            actions, log_probs = agent.sample_actions(obs32, action_rng)
            values = agent.values(obs32)
            cut_states = []
            for i, env in enumerate(envs):
                result = env.step(float(actions[i, 0]))
                rewards[i] = result.reward
                truncated[i] = result.truncated
                if result.truncated:
                    cut_states.append((i, result.obs))
                    obs[i] = envs[i].reset(env_rngs[i])
                else:
                    obs[i] = result.obs
            rollout.add(obs32, actions, log_probs, values, rewards, False, truncated)
            for i, cut_obs in cut_states:
                value = agent.values(cut_obs.reshape(1, -1))[0]
                rollout.set_truncation_value(i, value)
        consumed += n * horizon
        bootstrap = agent.values(obs.astype(dtype))
        rollout.finalize(bootstrap, acfg.gamma, acfg.gae_lambda)
        losses = agent.update(rollout, shuffle_rng)
        prev = consumed - n * horizon
        iterations += 1
        if (consumed // interval > prev // interval) or consumed >= total:
            train_seconds += time.perf_counter() - mark
            run_eval(consumed)
            mark = time.perf_counter()

    train_seconds += time.perf_counter() - mark
    return RunRecord(cfg, eval_points, iterations, train_seconds,
                     time.perf_counter() - t_start, agent.export_policy(), losses)
