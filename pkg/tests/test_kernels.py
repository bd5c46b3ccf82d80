"""Kernel correctness against slow reference implementations.

The matrix product is checked against a triple-loop float64 oracle, the
two backends are checked against each other over randomized shapes, and
the fused dense layer is checked against the explicit compose-of-passes
form it is supposed to equal.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picorl.kernels import (Activation, Backend, ShapeError, activate,
                            activate_grad, bias_add, dense, matmul)
from picorl.rng import Prng

BACKENDS = [Backend.GENERIC, Backend.FUSED]
ACTS = [Activation.IDENTITY, Activation.RELU, Activation.TANH]


def naive_matmul(a, b):
    n, k = a.shape
    k2, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for l in range(k):
                s += float(a[i, l]) * float(b[l, j])
            out[i, j] = s
    return out


@pytest.mark.parametrize("backend", BACKENDS)
def test_matmul_matches_triple_loop(backend):
    rng = Prng(11)
    for _ in range(40):
        n = 1 + int(rng.uniform() * 6)
        k = 1 + int(rng.uniform() * 6)
        m = 1 + int(rng.uniform() * 6)
        a = rng.gaussian(n * k).reshape(n, k)
        b = rng.gaussian(k * m).reshape(k, m)
        got = matmul(a, b, backend)
        want = naive_matmul(a, b)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-13)


def test_backends_bitwise_identical_over_many_shapes():
    # The fused path reorders nothing, so equality is exact, not approximate.
    rng = Prng(12)
    for _ in range(1000):
        n = 1 + int(rng.uniform() * 8)
        k = 1 + int(rng.uniform() * 64)
        m = 1 + int(rng.uniform() * 64)
        act = ACTS[int(rng.uniform() * 3)]
        x = rng.gaussian(n * k).reshape(n, k).astype(np.float32)
        w = rng.gaussian(k * m).reshape(k, m).astype(np.float32)
        b = rng.gaussian(m).astype(np.float32)
        got_g = dense(x, w, b, act, Backend.GENERIC)
        got_f = dense(x, w, b, act, Backend.FUSED)
        assert np.array_equal(got_g, got_f)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("act", ACTS)
def test_dense_equals_composed_passes(backend, act):
    rng = Prng(13)
    for dtype in (np.float32, np.float64):
        x = rng.gaussian(5 * 7).reshape(5, 7).astype(dtype)
        w = rng.gaussian(7 * 3).reshape(7, 3).astype(dtype)
        b = rng.gaussian(3).astype(dtype)
        want = activate(bias_add(matmul(x, w, backend), b), act)
        got = dense(x, w, b, act, backend)
        assert np.array_equal(got, want)
        assert got.dtype == dtype


@pytest.mark.parametrize("backend", BACKENDS)
def test_dense_out_buffer_is_written_and_returned(backend):
    rng = Prng(14)
    x = rng.gaussian(4 * 6).reshape(4, 6).astype(np.float32)
    w = rng.gaussian(6 * 2).reshape(6, 2).astype(np.float32)
    b = rng.gaussian(2).astype(np.float32)
    out = np.full((4, 2), np.nan, dtype=np.float32)
    got = dense(x, w, b, Activation.RELU, backend, out=out)
    assert got is out
    assert np.array_equal(out, dense(x, w, b, Activation.RELU, backend))


def test_matmul_out_buffer():
    a = np.arange(6, dtype=np.float64).reshape(2, 3)
    b = np.arange(12, dtype=np.float64).reshape(3, 4)
    out = np.empty((2, 4))
    got = matmul(a, b, out=out)
    assert got is out
    np.testing.assert_array_equal(out, a @ b)


def test_relu_zero_input_gives_zero_output_and_zero_grad():
    x = np.array([[-1.0, 0.0, 2.0]])
    y = activate(x, Activation.RELU)
    np.testing.assert_array_equal(y, [[0.0, 0.0, 2.0]])
    g = activate_grad(x, Activation.RELU)
    # Subgradient 0 at the kink: ties never contribute.
    np.testing.assert_array_equal(g, [[0.0, 0.0, 1.0]])


def test_activate_grad_formulas():
    x = np.linspace(-2, 2, 9).reshape(3, 3)
    np.testing.assert_array_equal(activate_grad(x, Activation.IDENTITY), np.ones_like(x))
    t = np.tanh(x)
    np.testing.assert_allclose(activate_grad(x, Activation.TANH), 1.0 - t * t, rtol=1e-15)


def test_identity_activation_passthrough():
    x = np.ones((2, 2))
    assert activate(x, Activation.IDENTITY) is x
    out = np.zeros((2, 2))
    got = activate(x, Activation.IDENTITY, out=out)
    assert got is out
    np.testing.assert_array_equal(out, x)


@given(st.integers(1, 6), st.integers(1, 24), st.integers(1, 24),
       st.sampled_from(ACTS), st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_fused_agrees_with_generic_property(n, k, m, act, seed):
    rng = Prng(seed)
    x = rng.gaussian(n * k).reshape(n, k)
    w = rng.gaussian(k * m).reshape(k, m)
    b = rng.gaussian(m)
    assert np.array_equal(dense(x, w, b, act, Backend.GENERIC),
                          dense(x, w, b, act, Backend.FUSED))


def test_shape_errors():
    x = np.zeros((2, 3))
    w = np.zeros((4, 5))
    with pytest.raises(ShapeError):
        matmul(x, w)
    with pytest.raises(ShapeError):
        dense(x, w, np.zeros(5), Activation.RELU)
    w_ok = np.zeros((3, 5))
    with pytest.raises(ShapeError):
        dense(x, w_ok, np.zeros(4), Activation.RELU)
    with pytest.raises(ShapeError):
        matmul(x, w_ok, out=np.zeros((2, 4)))
    with pytest.raises(ShapeError):
        dense(x, w_ok, np.zeros(5), Activation.RELU, Backend.FUSED,
              out=np.zeros((3, 5)))
    with pytest.raises(ShapeError):
        bias_add(x, np.zeros(2))
    with pytest.raises(ShapeError):
        matmul(np.zeros(3), np.zeros((3, 2)))


def test_backend_enum_round_trips_through_value():
    for backend in BACKENDS:
        assert Backend(backend.value) is backend
        assert isinstance(backend.label, str)
