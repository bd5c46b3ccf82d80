"""Dense-layer kernels over fixed-shape 2-D arrays, with two backends.

The GENERIC backend is the reference composition: matrix product, bias
add, and activation run as separate passes, each materializing its own
array. The FUSED backend computes a dense layer in one call, writing the
product straight into the output buffer and applying bias and activation
in place, so no intermediate is materialized. Both perform the same
arithmetic in the same order, so their results agree bit for bit; the
difference is pass structure and allocation behavior.

All kernels accept an optional ``out=`` buffer; when given, results are
written into it and no array is allocated inside the call. Validation
messages are only built on failure so the success path stays quiet.
"""

from __future__ import annotations

import enum

import numpy as np


class Backend(enum.Enum):
    """Kernel execution strategy."""

    GENERIC = "generic"
    FUSED = "fused"

    @property
    def label(self) -> str:
        if self is Backend.GENERIC:
            return "separate passes, materialized intermediates"
        return "single-pass dense layer, no intermediates"


DEFAULT_BACKEND = Backend.FUSED


class Activation(enum.IntEnum):
    """Elementwise nonlinearity; integer codes are stable across versions."""

    IDENTITY = 0
    RELU = 1
    TANH = 2


class ShapeError(ValueError):
    """A kernel was called with arrays whose shapes do not conform."""


# 0-d constants so the relu kernel does not wrap a fresh scalar per call.
_ZERO = {
    np.dtype(np.float32): np.zeros((), dtype=np.float32),
    np.dtype(np.float64): np.zeros((), dtype=np.float64),
}


def _check_pair(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"{what} needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} @ {b.shape}")


def _check_out(out: np.ndarray, rows: int, cols: int, dtype) -> None:
    if out.shape[0] != rows or out.shape[1] != cols or out.ndim != 2:
        raise ShapeError(f"out has shape {out.shape}, expected {(rows, cols)}")
    if out.dtype != dtype:
        raise ShapeError(f"out has dtype {out.dtype}, expected {dtype}")


def matmul(a: np.ndarray, b: np.ndarray, backend: Backend = DEFAULT_BACKEND,
           out: np.ndarray | None = None) -> np.ndarray:
    """Matrix product a @ b.

    Both backends share this primitive and produce identical bits; the
    backend argument exists so callers can dispatch uniformly and a
    future third strategy has a slot.
    """
    _check_pair(a, b, "matmul")
    if out is None:
        return np.dot(a, b)
    _check_out(out, a.shape[0], b.shape[1], np.result_type(a, b))
    np.dot(a, b, out=out)
    return out


def bias_add(x: np.ndarray, bias: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Add a length-matching bias row vector to every row of x."""
    if x.ndim != 2 or bias.ndim != 1 or bias.shape[0] != x.shape[1]:
        raise ShapeError(f"bias of shape {bias.shape} does not match rows of {x.shape}")
    return np.add(x, bias, out=out)


def activate(x: np.ndarray, act: Activation, out: np.ndarray | None = None) -> np.ndarray:
    """Apply the activation elementwise. relu maps 0 to 0 exactly."""
    if act is Activation.IDENTITY:
        if out is None:
            return x
        np.copyto(out, x)
        return out
    if act is Activation.RELU:
        return np.maximum(x, _ZERO[x.dtype], out=out)
    if act is Activation.TANH:
        return np.tanh(x, out=out)
    raise ValueError(f"unknown activation {act!r}")


def activate_grad(pre: np.ndarray, act: Activation) -> np.ndarray:
    """Derivative of the activation at pre-activation values.

    relu uses the subgradient 0 at exactly 0 so that backward passes are
    reproducible regardless of how ties were produced.
    """
    if act is Activation.IDENTITY:
        return np.ones_like(pre)
    if act is Activation.RELU:
        return (pre > 0).astype(pre.dtype)
    if act is Activation.TANH:
        t = np.tanh(pre)
        return 1.0 - t * t
    raise ValueError(f"unknown activation {act!r}")


def dense(x: np.ndarray, w: np.ndarray, bias: np.ndarray, act: Activation,
          backend: Backend = DEFAULT_BACKEND, out: np.ndarray | None = None) -> np.ndarray:
    """One dense layer: act(x @ w + bias).

    Under GENERIC this is three separate passes, each materializing a
    fresh array (the reference composition). Under FUSED the product is
    written into ``out`` (allocated once here if not supplied) and bias
    and activation are applied in place on that buffer.
    """
    _check_pair(x, w, "dense")
    if bias.ndim != 1 or bias.shape[0] != w.shape[1]:
        raise ShapeError(f"bias shape {bias.shape} does not match {w.shape}")
    if backend is Backend.GENERIC:
        h = matmul(x, w, Backend.GENERIC)
        h = bias_add(h, bias)
        h = activate(h, act)
        if out is not None:
            np.copyto(out, h)
            return out
        return h
    if out is None:
        out = np.empty((x.shape[0], w.shape[1]), dtype=np.result_type(x, w))
    else:
        _check_out(out, x.shape[0], w.shape[1], np.result_type(x, w))
    np.dot(x, w, out=out)
    np.add(out, bias, out=out)
    activate(out, act, out=out)
    return out
