"""Fixed-shape multilayer perceptrons with hand-rolled backprop and Adam.

Layer shapes are decided at construction and never change; forward in
training mode caches what backward needs (layer inputs and
post-activations), so there is no autodiff tape. Gradients of the loss
with respect to the network output are supplied by the caller, including
any 1/batch factor from a mean reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import Activation, Backend, DEFAULT_BACKEND, dense, matmul


@dataclass
class DenseLayer:
    """One dense layer; ``x`` and ``out`` are training-mode caches."""

    w: np.ndarray
    b: np.ndarray
    act: Activation
    x: np.ndarray | None = field(default=None, repr=False)
    out: np.ndarray | None = field(default=None, repr=False)


def _act_grad_from_out(out: np.ndarray, act: Activation) -> np.ndarray | None:
    # Derivatives recovered from post-activation values: for relu the
    # sign of the output determines the mask (0 stays 0), for tanh the
    # derivative is 1 - out^2. None means multiply by one.
    if act is Activation.IDENTITY:
        return None
    if act is Activation.RELU:
        return (out > 0).astype(out.dtype)
    if act is Activation.TANH:
        return 1.0 - out * out
    raise ValueError(f"unknown activation {act!r}")


class Mlp:
    """Fully connected network over a fixed dimension list."""

    def __init__(self, layers: list[DenseLayer], backend: Backend = DEFAULT_BACKEND):
        self.layers = layers
        self.backend = backend

    @classmethod
    def init(cls, input_dim: int, hidden_dims, output_dim: int, rng,
             activation: Activation = Activation.RELU,
             output_activation: Activation = Activation.IDENTITY,
             dtype=np.float32, backend: Backend = DEFAULT_BACKEND) -> "Mlp":
        """Uniform He-style init: W ~ U(+-sqrt(1/fan_in)), biases zero.

        Weights are drawn layer by layer, each as one flat uniform draw
        reshaped row-major, so the parameter values for a given rng seed
        do not depend on batch sizes or backend.
        """
        dims = [int(input_dim), *[int(h) for h in hidden_dims], int(output_dim)]
        if any(d <= 0 for d in dims):
            raise ValueError(f"all dimensions must be positive, got {dims}")
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            bound = np.sqrt(1.0 / fan_in)
            w = (2.0 * rng.uniform(fan_in * fan_out) - 1.0) * bound
            w = w.reshape(fan_in, fan_out).astype(dtype)
            b = np.zeros(fan_out, dtype=dtype)
            act = activation if i < len(dims) - 2 else output_activation
            layers.append(DenseLayer(w, b, act))
        return cls(layers, backend)

    @property
    def input_dim(self) -> int:
        return self.layers[0].w.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].w.shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *(l.w.shape[1] for l in self.layers))

    @property
    def dtype(self):
        return self.layers[0].w.dtype

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Run the network on a (batch, input_dim) array."""
        h = x
        for layer in self.layers:
            out = dense(h, layer.w, layer.b, layer.act, self.backend)
            if training:
                layer.x = h
                layer.out = out
            h = out
        return h

    def backward(self, d_out: np.ndarray):
        """Backprop d_loss/d_out through the caches of the last training forward.

        Returns (grads, d_in) where grads is a list of (dW, db) per layer
        and d_in is the gradient with respect to the network input. The
        caller owns any mean-reduction scaling of d_out.
        """
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        g = d_out
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if layer.x is None or layer.out is None:
                raise RuntimeError("backward called without a training-mode forward")
            ag = _act_grad_from_out(layer.out, layer.act)
            d_pre = g if ag is None else g * ag
            dw = matmul(layer.x.T, d_pre, self.backend)
            db = d_pre.sum(axis=0)
            g = matmul(d_pre, layer.w.T, self.backend)
            grads[i] = (dw, db)
        return grads, g

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a stable order: w0, b0, w1, b1, ..."""
        out = []
        for layer in self.layers:
            out.append(layer.w)
            out.append(layer.b)
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "Mlp":
        """Deep copy of parameters; caches are not carried over."""
        layers = [DenseLayer(l.w.copy(), l.b.copy(), l.act) for l in self.layers]
        return Mlp(layers, self.backend)


def flatten_grads(grads) -> list[np.ndarray]:
    """Flatten per-layer (dW, db) pairs to match Mlp.params() order."""
    flat = []
    for dw, db in grads:
        flat.append(dw)
        flat.append(db)
    return flat


class Adam:
    """Adam with bias correction; updates the given arrays in place."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7):
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def polyak_update(target_params: list[np.ndarray], online_params: list[np.ndarray],
                  beta: float) -> None:
    """Slow-moving average: target <- beta * target + (1 - beta) * online."""
    if len(target_params) != len(online_params):
        raise ValueError("parameter lists differ in length")
    for t, o in zip(target_params, online_params):
        t *= beta
        t += (1.0 - beta) * o
