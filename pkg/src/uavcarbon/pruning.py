"""Dynamic neuron masking for the actor networks.

Each episode the lowest-importance neurons of every hidden fully connected
layer are masked; importance is the L1 magnitude of a neuron's weight row
over the full shadowed parameters, so masking is non-destructive and neurons
can revive when re-scored later.  The output layer is exempt (masking it
would zero action dimensions for the whole episode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nncore.net import DenseLayer, DenseNet


@dataclass(frozen=True)
class PruneMask:
    per_layer: tuple[np.ndarray, ...]  # 0/1 over neurons, maskable layers only
    rate: float
    episode: int

    def masked_counts(self) -> tuple[int, ...]:
        return tuple(int((m == 0.0).sum()) for m in self.per_layer)


def importance_scores(layer: DenseLayer) -> np.ndarray:
    """Per-neuron L1 of the weight row, on the full (unmasked) parameters."""
    if layer.weight.shape[0] < 1:
        raise ValueError("layer has no neurons")
    return np.abs(layer.weight).sum(axis=1)


def apply_mask(net: DenseNet, rate: float, episode: int = 0) -> PruneMask:
    """Mask floor(neurons * rate) lowest-importance neurons per hidden layer.

    Ties break toward the lowest neuron index.  Masks are installed on the
    layers in place; parameters are untouched, so a later call with rate 0
    restores the original behavior exactly.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("pruning rate must lie in [0, 1)")
    masks = []
    for layer in net.layers[:-1]:
        n = layer.weight.shape[0]
        k = math.floor(n * rate)
        mask = np.ones(n)
        if k > 0:
            scores = importance_scores(layer)
            order = np.lexsort((np.arange(n), scores))
            mask[order[:k]] = 0.0
        layer.mask = mask
        masks.append(mask.copy())
    return PruneMask(per_layer=tuple(masks), rate=rate, episode=episode)
