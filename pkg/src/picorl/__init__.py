"""Deep RL for continuous control with small fixed-shape networks.

Everything runs on plain numpy arrays whose shapes are fixed up front:
the same dense kernels drive training (SAC, TD3, PPO on the pendulum
swing-up task) and a preallocated inference runtime that performs no
heap allocation per forward pass.
"""

import os

# Pin BLAS thread pools before numpy loads so repeated runs with the same
# seed reduce in the same order. A no-op if the user already set them.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del os, _var

from .kernels import Activation, Backend, ShapeError, activate, activate_grad, bias_add, dense, matmul
from .rng import Prng
from .nn import Adam, DenseLayer, Mlp, polyak_update
from . import pendulum
from .buffers import ReplayBuffer, RolloutBuffer, Transition, advantage_normalize, gae_compute
from .sac import SacAgent, SacConfig
from .td3 import Td3Agent, Td3Config
from .ppo import PpoAgent, PpoConfig
from .training import RunRecord, TrainRunConfig, evaluate_policy, iqm, train
from .checkpoint import (
    CheckpointError,
    CheckpointFormatError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    PolicyCheckpoint,
)
from .runtime import InferenceRuntime, measure_allocations, measure_latency

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "Adam",
    "Backend",
    "CheckpointError",
    "CheckpointFormatError",
    "CheckpointTruncatedError",
    "CheckpointVersionError",
    "DenseLayer",
    "InferenceRuntime",
    "Mlp",
    "PolicyCheckpoint",
    "PpoAgent",
    "PpoConfig",
    "Prng",
    "ReplayBuffer",
    "RolloutBuffer",
    "RunRecord",
    "SacAgent",
    "SacConfig",
    "ShapeError",
    "Td3Agent",
    "Td3Config",
    "TrainRunConfig",
    "Transition",
    "activate",
    "activate_grad",
    "advantage_normalize",
    "bias_add",
    "dense",
    "evaluate_policy",
    "gae_compute",
    "iqm",
    "matmul",
    "measure_allocations",
    "measure_latency",
    "pendulum",
    "polyak_update",
    "train",
]
