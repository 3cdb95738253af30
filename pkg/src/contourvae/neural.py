"""Dense tanh/identity networks with hand-written reverse-mode gradients and Adam."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError

__all__ = [
    "LayerSpec",
    "Layer",
    "MlpParams",
    "AdamState",
    "init_mlp",
    "forward",
    "backward",
    "adam_init",
    "adam_step",
]

ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "tanh"

    @property
    def spec(self):
        return LayerSpec(self.weight.shape[1], self.weight.shape[0], self.activation)


@dataclass(frozen=True, eq=False)
class MlpParams:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        for a, b in zip(layers, layers[1:]):
            if a.weight.shape[0] != b.weight.shape[1]:
                raise ValueError("layer shapes do not chain")
        for layer in layers:
            if layer.bias.shape != (layer.weight.shape[0],):
                raise ValueError("bias shape does not match weight")
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self):
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self):
        return self.layers[-1].weight.shape[0]

    def arrays(self):
        """Flat list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def with_arrays(self, arrays):
        it = iter(arrays)
        return MlpParams(tuple(Layer(next(it), next(it), l.activation) for l in self.layers))

    def __eq__(self, other):
        if not isinstance(other, MlpParams) or len(self.layers) != len(other.layers):
            return NotImplemented
        return all(
            a.activation == b.activation
            and np.array_equal(a.weight, b.weight)
            and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


def init_mlp(specs, rng: np.random.Generator) -> MlpParams:
    """Uniform ``±sqrt(6/(in+out))`` weights and zero biases."""
    layers = []
    for spec in specs:
        bound = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        w = rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim))
        layers.append(Layer(w, np.zeros(spec.out_dim), spec.activation))
    return MlpParams(tuple(layers))


def forward(params: MlpParams, x):
    """Evaluate the network on a vector or a ``(batch, in_dim)`` matrix.

    Returns ``(output, tape)``; the tape holds each layer's input and output.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.in_dim:
        raise ValueError(f"input has {x.shape[-1]} features, network expects {params.in_dim}")
    tape = []
    h = x
    for layer in params.layers:
        a = h @ layer.weight.T + layer.bias
        out = np.tanh(a) if layer.activation == "tanh" else a
        tape.append((h, out))
        h = out
    return h, tape


def backward(params: MlpParams, tape, grad_out):
    """Reverse pass. Returns ``(grads, grad_input)`` with ``grads`` as ``[dW0, db0, ...]``.

    For batched input the parameter gradients are summed over the batch.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    if len(tape) != len(params.layers):
        raise ValueError("tape does not match the network")
    if g.shape != tape[-1][1].shape:
        raise ValueError(f"output gradient shape {g.shape} != output shape {tape[-1][1].shape}")
    grads = [None] * (2 * len(params.layers))
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        h_in, out = tape[i]
        if layer.activation == "tanh":
            g = g * (1.0 - out * out)
        if g.ndim == 1:
            grads[2 * i] = np.outer(g, h_in)
            grads[2 * i + 1] = g.copy()
        else:
            grads[2 * i] = g.T @ h_in
            grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weight
    return grads, g


@dataclass(frozen=True, eq=False)
class AdamState:
    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(arrays, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(
        [np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays],
        0, lr, beta1, beta2, eps,
    )


def adam_step(arrays, grads, state: AdamState):
    """One bias-corrected Adam update on a list of arrays.

    Returns ``(new_arrays, new_state)``; inputs are not modified.
    """
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ValueError("parameter, gradient and state lists differ in length")
    for i, g in enumerate(grads):
        if g.shape != arrays[i].shape:
            raise ValueError(f"gradient {i} has shape {g.shape}, expected {arrays[i].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter array {i} at step {state.step}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new, ms, vs = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        ms.append(m)
        vs.append(v)
    return new, replace(state, m=ms, v=vs, step=t)
