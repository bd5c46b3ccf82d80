"""Static-memory policy inference.

The runtime copies checkpoint parameters into contiguous storage it
owns, carves per-layer views out of two preallocated ping-pong
activation buffers, and from then on a forward pass touches only those
buffers: no array is created per call. That makes the per-call cost flat
and lets the same loop run unchanged where heap allocation is banned.

Instrumentation lives here too: ``measure_allocations`` counts allocator
traffic around a callable with both the interpreter's exact live-block
counter and a byte-level trace, and ``measure_latency`` reports
percentile timings per forward call.
"""

from __future__ import annotations

import gc
import itertools
import sys
import time
import tracemalloc
from typing import Callable, NamedTuple

import numpy as np

from .checkpoint import PolicyCheckpoint
from .kernels import Backend, DEFAULT_BACKEND, activate, bias_add, dense, matmul

# Widest layer the preallocated buffers accept; checkpoint loading into
# the runtime fails fast above this.
MAX_WIDTH = 256


class InferenceRuntime:
    """Fixed-buffer forward passes for one policy network."""

    def __init__(self, ckpt: PolicyCheckpoint, backend: Backend = DEFAULT_BACKEND):
        widths = ckpt.dims
        too_wide = [d for d in widths if d > MAX_WIDTH]
        if too_wide:
            raise ValueError(f"layer width {max(too_wide)} exceeds runtime limit {MAX_WIDTH}")
        self.backend = backend
        self.input_dim = ckpt.input_dim
        self.output_dim = ckpt.output_dim
        dtype = ckpt.dtype
        self._w = [np.ascontiguousarray(w) for w in ckpt.weights]
        self._b = [np.ascontiguousarray(b) for b in ckpt.biases]
        self._acts = list(ckpt.activations)
        self._scale = None if ckpt.action_scale is None else ckpt.action_scale.copy()

        # Two ping-pong buffers sized to the widest layer; every layer
        # input/output is a fixed slice of one of them, set up once here.
        width = max(widths)
        self._ping = np.zeros((1, width), dtype=dtype)
        self._pong = np.zeros((1, width), dtype=dtype)
        buffers = [self._ping, self._pong]
        self._views = [buffers[i % 2][:, :d] for i, d in enumerate(widths)]
        self._in_row = self._views[0][0]
        self._out_row = self._views[-1][0]
        self._zero = np.zeros((), dtype=dtype)

        # Validate every layer through the checked kernels once, then
        # freeze a (w, b, act_code, src, dst) plan; forward runs the raw
        # ufuncs over it so the hot path builds no message strings or
        # temporary shape tuples. Biases are kept as (1, fan_out) rows:
        # a broadcast add would allocate an iterator buffer per call,
        # a same-shape add does not. Results are bit-identical to the
        # kernels because these are the same operations.
        self._plan = []
        for i, (w, b, act) in enumerate(zip(self._w, self._b, self._acts)):
            dense(self._views[i], w, b, act, backend, out=self._views[i + 1])
            row_bias = np.ascontiguousarray(b.reshape(1, -1))
            self._plan.append((w, row_bias, int(act), self._views[i], self._views[i + 1]))

    def forward(self, obs: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """One action from one observation; allocation-free after init.

        Returns a view into an internal buffer that is only valid until
        the next call; pass ``out`` to copy the action elsewhere.
        """
        np.copyto(self._in_row, obs)
        zero = self._zero
        for w, b, code, src, dst in self._plan:
            np.dot(src, w, out=dst)
            np.add(dst, b, out=dst)
            if code == 1:
                np.maximum(dst, zero, out=dst)
            elif code == 2:
                np.tanh(dst, out=dst)
        if self._scale is not None:
            np.multiply(self._out_row, self._scale, out=self._out_row)
        if out is not None:
            np.copyto(out, self._out_row)
            return out
        return self._out_row


class AllocationReport(NamedTuple):
    calls: int
    net_blocks: int
    net_bytes: int
    peak_bytes: int

    @property
    def clean(self) -> bool:
        """True when the measured function allocates nothing per call.

        The interpreter itself has a constant noise floor (freelists
        grow once, the trace machinery books a few objects): an empty
        loop reports ~100 B and a single buffer-reusing ufunc ~300 B,
        independent of the call count. One transient (1, 64) float32
        array pushes the peak past 700 B and scales nothing else, so
        the discriminating thresholds are: bounded constant drift (not
        per-call growth) and a peak under one small array's footprint.
        """
        return (self.net_blocks <= 64 and self.net_bytes <= 4096
                and self.peak_bytes < 512)


def measure_allocations(fn: Callable[[], object], calls: int = 1_000_000,
                        warmup: int = 256) -> AllocationReport:
    """Count allocator traffic across ``calls`` invocations of fn.

    Two independent passes: the interpreter's live-block count taken
    around the loop (exact, catches anything retained), and a traced
    pass recording net and peak byte deltas (catches transient per-call
    arrays; an allocation-free loop shows a few hundred bytes of
    interpreter noise at most, far below one float buffer).
    """
    for _ in range(warmup):
        fn()
    gc.collect()
    before = sys.getallocatedblocks()
    for _ in itertools.repeat(None, calls):
        fn()
    net_blocks = sys.getallocatedblocks() - before

    tracemalloc.start()
    for _ in range(warmup):
        fn()
    gc.collect()
    tracemalloc.reset_peak()
    base, _ = tracemalloc.get_traced_memory()
    for _ in itertools.repeat(None, calls):
        fn()
    current, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return AllocationReport(calls, net_blocks, current - base, peak - base)


def measure_latency(runtime: InferenceRuntime, rng, calls: int = 10_000,
                    warmup: int = 256) -> dict[str, float]:
    """Per-call forward latency in microseconds over random inputs."""
    obs = rng.gaussian(calls * runtime.input_dim).reshape(calls, -1)
    obs = obs.astype(runtime._ping.dtype)
    for i in range(warmup):
        runtime.forward(obs[i % calls])
    samples = np.empty(calls)
    for i in range(calls):
        t0 = time.perf_counter_ns()
        runtime.forward(obs[i])
        samples[i] = time.perf_counter_ns() - t0
    samples /= 1_000.0
    return {
        "calls": float(calls),
        "mean_us": float(samples.mean()),
        "p50_us": float(np.percentile(samples, 50)),
        "p99_us": float(np.percentile(samples, 99)),
    }
