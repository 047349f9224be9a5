"""Minimal dense-network substrate.

Plain multi-layer perceptrons over float64 numpy arrays with explicit
forward caches and exact reverse-mode gradients.  Layers carry a per-neuron
prune mask: a masked neuron reads as zero in every forward pass and emits
zero gradient, while the underlying parameters stay shadowed so later
episodes can revive it.

Single-sample passes go through the selected kernel backend; batched passes
use BLAS matmuls directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in); row i feeds neuron i
    bias: np.ndarray  # (out,)
    activation: str
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.activation not in backend.ACTIVATION_IDS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ValueError("bias length must match the neuron count")
        if self.mask is None:
            self.mask = np.ones(self.weight.shape[0])

    @property
    def act_id(self) -> int:
        return backend.ACTIVATION_IDS[self.activation]


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations from one forward pass."""

    inputs: list[np.ndarray]
    pre_acts: list[np.ndarray]
    single: bool  # 1-D sample vs (B, dim) batch


class DenseNet:
    """An MLP as an explicit layer list with forward/backward/update hooks."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ValueError("at least one layer required")
        for prev, cur in zip(layers, layers[1:]):
            if cur.weight.shape[1] != prev.weight.shape[0]:
                raise ValueError("adjacent layer dimensions are incompatible")
        self.layers = layers

    @classmethod
    def build(
        cls,
        sizes: list[int],
        rng: np.random.Generator,
        hidden_activation: str = "mish",
        output_activation: str = "identity",
    ) -> "DenseNet":
        """Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        if len(sizes) < 2:
            raise ValueError("need an input and an output size")
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
            limit = 1.0 / np.sqrt(n_in)
            act = output_activation if i == len(sizes) - 2 else hidden_activation
            layers.append(
                DenseLayer(
                    weight=rng.uniform(-limit, limit, size=(n_out, n_in)),
                    bias=rng.uniform(-limit, limit, size=n_out),
                    activation=act,
                )
            )
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def n_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"input dimension {x.shape[-1]} does not match {self.in_dim}"
            )
        inputs: list[np.ndarray] = []
        pre_acts: list[np.ndarray] = []
        h = x
        for layer in self.layers:
            inputs.append(h)
            if single:
                h, z = backend.dense_vec_forward(
                    h, layer.weight, layer.bias, layer.mask, layer.act_id
                )
            else:
                z = (h @ layer.weight.T + layer.bias) * layer.mask
                h = backend.act_forward(z, layer.act_id)
            pre_acts.append(z)
        return h, ForwardCache(inputs=inputs, pre_acts=pre_acts, single=single)

    def backward(
        self, cache: ForwardCache, dy: np.ndarray
    ) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
        """Exact gradients for the pass that produced ``cache``.

        Returns per-layer (dW, db) plus the gradient w.r.t. the input.
        """
        if len(cache.inputs) != len(self.layers):
            raise ValueError("cache does not match this network")
        dy = np.asarray(dy, dtype=float)
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)  # type: ignore[list-item]
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            x, z = cache.inputs[i], cache.pre_acts[i]
            if cache.single:
                dw, db, dy = backend.dense_vec_backward(
                    dy, z, x, layer.weight, layer.mask, layer.act_id
                )
            else:
                dz = dy * backend.act_grad(z, layer.act_id) * layer.mask
                dw = dz.T @ x
                db = dz.sum(axis=0)
                dy = dz @ layer.weight
            grads[i] = (dw, db)
        return grads, dy

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def copy(self) -> "DenseNet":
        return DenseNet(
            [
                DenseLayer(
                    weight=l.weight.copy(),
                    bias=l.bias.copy(),
                    activation=l.activation,
                    mask=l.mask.copy(),
                )
                for l in self.layers
            ]
        )

    def clear_masks(self) -> None:
        for layer in self.layers:
            layer.mask = np.ones(layer.weight.shape[0])


def soft_update(target: DenseNet, online: DenseNet, rate: float) -> None:
    """Exponential tracking: target <- rate * online + (1 - rate) * target."""
    if len(target.layers) != len(online.layers):
        raise ValueError("architectures differ")
    for t, o in zip(target.layers, online.layers):
        if t.weight.shape != o.weight.shape:
            raise ValueError("architectures differ")
        t.weight *= 1.0 - rate
        t.weight += rate * o.weight
        t.bias *= 1.0 - rate
        t.bias += rate * o.bias


def time_embed(t: int, dim: int, base: float = 10_000.0) -> np.ndarray:
    """Interleaved sin/cos of the step index over geometric frequencies."""
    if dim % 2 != 0:
        raise ValueError("embedding dimension must be even")
    if t < 1:
        raise ValueError("step index starts at 1")
    half = dim // 2
    freqs = base ** (-np.arange(half) / half)
    angles = t * freqs
    out = np.empty(dim)
    out[0::2] = np.sin(angles)
    out[1::2] = np.cos(angles)
    return out
