"""Portable binary policy checkpoints.

Layout (all integers little-endian):

    magic "TRLC" | version u32 | float_width u8 (4 or 8) | has_scale u8
    | n_layers u16 | dims u32 x (n_layers + 1) | activation codes u8 x n_layers
    | [action scale, output_dim floats]
    | per layer: weights row-major (fan_in x fan_out floats), then biases

Loading validates the magic, version, float width, dimensions and exact
payload length, and never reads past the declared sizes; trailing bytes
are an error. Saving also writes a human-readable JSON summary next to
the binary (same name plus ``.json``) for debugging; the binary alone is
authoritative.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .kernels import Activation, Backend, DEFAULT_BACKEND
from .nn import DenseLayer, Mlp

MAGIC = b"TRLC"
VERSION = 1

_WIDTH_TO_DTYPE = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """Bad magic, malformed field, or trailing bytes."""


class CheckpointVersionError(CheckpointError):
    """Version field not supported by this reader."""


class CheckpointTruncatedError(CheckpointError):
    """File ends before the declared payload."""


@dataclass
class PolicyCheckpoint:
    """A feedforward policy: layer parameters plus output scaling."""

    input_dim: int
    output_dim: int
    hidden_dims: tuple[int, ...]
    activations: tuple[Activation, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    action_scale: np.ndarray | None = None
    version: int = field(default=VERSION)

    def __post_init__(self):
        dims = self.dims
        if len(self.activations) != len(dims) - 1:
            raise ValueError("one activation per layer required")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("one weight and bias array per layer required")
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            if self.weights[i].shape != (fan_in, fan_out):
                raise ValueError(f"layer {i} weights have shape {self.weights[i].shape}, "
                                 f"expected {(fan_in, fan_out)}")
            if self.biases[i].shape != (fan_out,):
                raise ValueError(f"layer {i} bias has shape {self.biases[i].shape}, "
                                 f"expected {(fan_out,)}")
        if self.action_scale is not None and self.action_scale.shape != (self.output_dim,):
            raise ValueError("action scale must have one entry per output")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def dtype(self) -> np.dtype:
        return self.weights[0].dtype

    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    @classmethod
    def from_mlp(cls, mlp: Mlp, action_scale=None) -> "PolicyCheckpoint":
        """Snapshot a network; parameters are copied, not aliased."""
        dims = mlp.dims
        scale = None
        if action_scale is not None:
            scale = np.full(dims[-1], action_scale, dtype=mlp.dtype)
        return cls(dims[0], dims[-1], tuple(dims[1:-1]),
                   tuple(l.act for l in mlp.layers),
                   [l.w.copy() for l in mlp.layers],
                   [l.b.copy() for l in mlp.layers],
                   scale)

    def to_mlp(self, backend: Backend = DEFAULT_BACKEND) -> Mlp:
        layers = [DenseLayer(w.copy(), b.copy(), act)
                  for w, b, act in zip(self.weights, self.biases, self.activations)]
        return Mlp(layers, backend)

    def save(self, path) -> None:
        path = str(path)
        width = self.dtype.itemsize
        if width not in _WIDTH_TO_DTYPE:
            raise ValueError(f"unsupported parameter dtype {self.dtype}")
        dims = self.dims
        n_layers = len(dims) - 1
        parts = [struct.pack("<4sIBBH", MAGIC, self.version, width,
                             int(self.action_scale is not None), n_layers)]
        parts.append(struct.pack(f"<{n_layers + 1}I", *dims))
        parts.append(struct.pack(f"<{n_layers}B", *(int(a) for a in self.activations)))
        le = _WIDTH_TO_DTYPE[width]
        if self.action_scale is not None:
            parts.append(self.action_scale.astype(le).tobytes())
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ascontiguousarray(w).astype(le).tobytes())
            parts.append(b.astype(le).tobytes())
        with open(path, "wb") as f:
            f.write(b"".join(parts))
        with open(path + ".json", "w") as f:
            json.dump(self._summary(), f, indent=2)
            f.write("\n")

    def _summary(self) -> dict:
        return {
            "version": self.version,
            "float_width": self.dtype.itemsize,
            "dims": list(self.dims),
            "activations": [a.name.lower() for a in self.activations],
            "action_scale": (None if self.action_scale is None
                             else [float(s) for s in self.action_scale]),
            "param_count": self.param_count(),
            "weight_abs_sums": [float(np.abs(w).sum()) for w in self.weights],
        }

    @classmethod
    def load(cls, path) -> "PolicyCheckpoint":
        with open(str(path), "rb") as f:
            raw = f.read()
        cur = _Cursor(raw)
        magic, version, width, has_scale, n_layers = cur.unpack("<4sIBBH")
        if magic != MAGIC:
            raise CheckpointFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CheckpointVersionError(f"unsupported version {version}")
        if width not in _WIDTH_TO_DTYPE:
            raise CheckpointFormatError(f"unsupported float width {width}")
        if has_scale not in (0, 1):
            raise CheckpointFormatError(f"bad scale flag {has_scale}")
        if n_layers < 1:
            raise CheckpointFormatError("network needs at least one layer")
        dims = cur.unpack(f"<{n_layers + 1}I", always_tuple=True)
        if any(d == 0 for d in dims):
            raise CheckpointFormatError(f"zero dimension in {dims}")
        codes = cur.unpack(f"<{n_layers}B", always_tuple=True)
        try:
            acts = tuple(Activation(c) for c in codes)
        except ValueError:
            raise CheckpointFormatError(f"unknown activation code in {codes}") from None
        dtype = _WIDTH_TO_DTYPE[width]
        scale = cur.floats(dims[-1], dtype) if has_scale else None
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(cur.floats(fan_in * fan_out, dtype).reshape(fan_in, fan_out))
            biases.append(cur.floats(fan_out, dtype))
        if cur.remaining():
            raise CheckpointFormatError(f"{cur.remaining()} trailing bytes")
        return cls(dims[0], dims[-1], tuple(dims[1:-1]), acts, weights, biases,
                   scale, version)


class CheckpointPolicy:
    """Batched deterministic policy view of a checkpoint, for evaluation."""

    def __init__(self, ckpt: PolicyCheckpoint, backend: Backend = DEFAULT_BACKEND):
        self._mlp = ckpt.to_mlp(backend)
        self._scale = ckpt.action_scale

    def act_batch(self, obs: np.ndarray, deterministic: bool = True, rng=None) -> np.ndarray:
        if not deterministic:
            raise ValueError("a bare checkpoint has no sampling head")
        actions = self._mlp.forward(np.asarray(obs, dtype=self._mlp.dtype))
        if self._scale is not None:
            actions = actions * self._scale
        return actions


class _Cursor:
    """Sequential reader that refuses to run off the end."""

    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CheckpointTruncatedError(
                f"needed {n} bytes at offset {self.pos}, have {len(self.raw) - self.pos}")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, always_tuple: bool = False):
        vals = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        if always_tuple or len(vals) > 1:
            return vals
        return vals[0]

    def floats(self, count: int, dtype: np.dtype) -> np.ndarray:
        return np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).copy()

    def remaining(self) -> int:
        return len(self.raw) - self.pos
