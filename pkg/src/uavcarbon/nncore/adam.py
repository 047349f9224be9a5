"""Bias-corrected Adam over DenseNet parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .net import DenseNet


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    v: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0.0 < self.lr <= 1.0:
            raise ValueError("learning rate must lie in (0, 1]")

    @classmethod
    def for_net(cls, net: DenseNet, lr: float, **kwargs) -> "AdamState":
        state = cls(lr=lr, **kwargs)
        for layer in net.layers:
            state.m.append((np.zeros_like(layer.weight), np.zeros_like(layer.bias)))
            state.v.append((np.zeros_like(layer.weight), np.zeros_like(layer.bias)))
        return state


def adam_step(
    state: AdamState, net: DenseNet, grads: list[tuple[np.ndarray, np.ndarray]]
) -> None:
    """One in-place update; deterministic given the gradient sequence."""
    if len(grads) != len(net.layers):
        raise ValueError("one (dW, db) pair per layer required")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for layer, (mw, mb), (vw, vb), (dw, db) in zip(
        net.layers, state.m, state.v, grads
    ):
        for param, m, v, g in (
            (layer.weight, mw, vw, dw),
            (layer.bias, mb, vb, db),
        ):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * (g * g)
            param -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
