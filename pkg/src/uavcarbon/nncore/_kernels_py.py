"""Pure-numpy reference kernels for the single-sample dense layer path.

These mirror the compiled kernels in ``_kernels.pyx``; either module can be
swapped in behind ``backend`` without changing semantics.
"""

from __future__ import annotations

import numpy as np

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_MISH = 3


def _softplus(z: np.ndarray) -> np.ndarray:
    # overflow-safe: softplus(z) = max(z, 0) + log1p(exp(-|z|))
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def act_forward(z: np.ndarray, act_id: int) -> np.ndarray:
    if act_id == ACT_IDENTITY:
        return z.copy()
    if act_id == ACT_RELU:
        return np.maximum(z, 0.0)
    if act_id == ACT_TANH:
        return np.tanh(z)
    if act_id == ACT_MISH:
        return z * np.tanh(_softplus(z))
    raise ValueError(f"unknown activation id {act_id}")


def act_grad(z: np.ndarray, act_id: int) -> np.ndarray:
    if act_id == ACT_IDENTITY:
        return np.ones_like(z)
    if act_id == ACT_RELU:
        return (z > 0.0).astype(z.dtype)
    if act_id == ACT_TANH:
        t = np.tanh(z)
        return 1.0 - t * t
    if act_id == ACT_MISH:
        t = np.tanh(_softplus(z))
        sig = 1.0 / (1.0 + np.exp(-z))
        return t + z * (1.0 - t * t) * sig
    raise ValueError(f"unknown activation id {act_id}")


def dense_vec_forward(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    mask: np.ndarray,
    act_id: int,
) -> tuple[np.ndarray, np.ndarray]:
    """One masked dense layer on a single sample; returns (y, pre-activation)."""
    z = (weight @ x + bias) * mask
    return act_forward(z, act_id), z


def dense_vec_backward(
    dy: np.ndarray,
    z: np.ndarray,
    x: np.ndarray,
    weight: np.ndarray,
    mask: np.ndarray,
    act_id: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward pass of the layer above; returns (dW, db, dx).

    Masked neurons emit zero gradient everywhere, so their parameter rows
    never move and they contribute nothing to the input gradient.
    """
    dz = dy * act_grad(z, act_id) * mask
    return np.outer(dz, x), dz.copy(), weight.T @ dz
