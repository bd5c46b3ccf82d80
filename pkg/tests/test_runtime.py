"""The fixed-buffer inference path must match training forwards bit for bit."""

import numpy as np
import pytest

from picorl.checkpoint import PolicyCheckpoint
from picorl.kernels import Activation, Backend
from picorl.nn import Mlp
from picorl.rng import Prng
from picorl.runtime import (
    MAX_WIDTH,
    InferenceRuntime,
    measure_allocations,
    measure_latency,
)


def build(dims, out_act=Activation.TANH, hidden_act=Activation.RELU,
          dtype=np.float32, scale=2.0, backend=Backend.FUSED, seed=80):
    net = Mlp.init(dims[0], dims[1:-1], dims[-1], Prng(seed),
                   activation=hidden_act, output_activation=out_act,
                   dtype=dtype, backend=backend)
    ckpt = PolicyCheckpoint.from_mlp(net, action_scale=scale)
    return InferenceRuntime(ckpt, backend=backend), net


@pytest.mark.parametrize("backend", [Backend.GENERIC, Backend.FUSED])
@pytest.mark.parametrize("dims,hidden_act,out_act", [
    ((3, 64, 64, 1), Activation.RELU, Activation.TANH),
    ((13, 64, 64, 4), Activation.RELU, Activation.TANH),
    ((5, 32, 32, 32, 32, 2), Activation.TANH, Activation.IDENTITY),
    ((4, 8, 3), Activation.RELU, Activation.IDENTITY),
])
def test_forward_bitwise_matches_training_stack(backend, dims, hidden_act, out_act):
    rt, net = build(dims, out_act, hidden_act, backend=backend, scale=None)
    obs = Prng(81).gaussian(50 * dims[0]).reshape(50, dims[0]).astype(np.float32)
    # The runtime consumes one observation per call, so the reference is
    # a batch of one. A wider batch through the same weights can differ
    # in the last ulp (BLAS picks a different summation order per GEMM
    # shape), which is why the batched output is only checked loosely.
    batched = net.forward(obs)
    for i in range(50):
        got = rt.forward(obs[i]).copy()
        np.testing.assert_array_equal(got, net.forward(obs[i:i + 1])[0])
        np.testing.assert_allclose(got, batched[i], rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_action_scale_applied(dtype):
    rt, net = build((3, 16, 2), dtype=dtype, scale=2.0)
    obs = Prng(82).gaussian(3).astype(dtype)
    got = rt.forward(obs)
    want = net.forward(obs.reshape(1, -1))[0] * dtype(2.0)
    np.testing.assert_array_equal(got, want)
    assert got.dtype == dtype


def test_output_view_is_reused_and_out_copies():
    rt, _ = build((3, 8, 1))
    a = rt.forward(np.ones(3, dtype=np.float32))
    first = a.copy()
    b = rt.forward(np.full(3, -2.0, dtype=np.float32))
    assert a is b  # same internal buffer, old values gone
    assert not np.array_equal(b, first)

    hold = np.empty(1, dtype=np.float32)
    out = rt.forward(np.ones(3, dtype=np.float32), out=hold)
    assert out is hold
    np.testing.assert_array_equal(hold, first)
    rt.forward(np.zeros(3, dtype=np.float32))
    np.testing.assert_array_equal(hold, first)  # copy survives the next call


def test_width_limit_enforced():
    net = Mlp.init(3, (MAX_WIDTH + 1,), 1, Prng(83))
    ckpt = PolicyCheckpoint.from_mlp(net)
    with pytest.raises(ValueError, match="width"):
        InferenceRuntime(ckpt)
    InferenceRuntime(PolicyCheckpoint.from_mlp(Mlp.init(3, (MAX_WIDTH,), 1, Prng(83))))


@pytest.mark.parametrize("backend", [Backend.GENERIC, Backend.FUSED])
def test_forward_is_allocation_free(backend):
    rt, _ = build((13, 64, 64, 4), backend=backend)
    obs = Prng(84).gaussian(13).astype(np.float32)
    report = measure_allocations(lambda: rt.forward(obs), calls=50_000)
    assert report.clean, report


def test_allocation_probe_catches_a_leaky_function():
    sink = []
    report = measure_allocations(lambda: sink.append(np.zeros(64)), calls=2_000)
    assert not report.clean
    assert report.net_blocks > 1_000


def test_allocation_probe_catches_transient_arrays():
    x = np.ones((1, 64), dtype=np.float32)
    report = measure_allocations(lambda: x + 1.0, calls=2_000)
    assert report.peak_bytes > 512  # fresh result array each call
    assert not report.clean


def test_latency_report_shape():
    rt, _ = build((3, 16, 1))
    rep = measure_latency(rt, Prng(85), calls=500, warmup=16)
    assert set(rep) == {"calls", "mean_us", "p50_us", "p99_us"}
    assert rep["calls"] == 500.0
    assert 0.0 < rep["p50_us"] <= rep["p99_us"]
    assert rep["mean_us"] < 1_000.0  # a three-layer net is microseconds, not ms
