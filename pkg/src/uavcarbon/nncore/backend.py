"""Kernel backend selection.

The single-sample dense kernels dominate rollout time (T denoiser passes per
environment step at batch size 1), so they exist both compiled and in pure
numpy.  The compiled module is preferred when importable; set
``UAVCARBON_KERNELS=python`` or ``cython`` to force one side.  Minibatch
(2-D) math is BLAS-backed numpy regardless of backend.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("UAVCARBON_KERNELS", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise RuntimeError(
        f"UAVCARBON_KERNELS must be auto, cython, or python, not {_requested!r}"
    )

if _requested == "python":
    _impl = _kernels_py
    _name = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        _name = "cython"
    except ImportError:
        if _requested == "cython":
            raise RuntimeError(
                "UAVCARBON_KERNELS=cython but the compiled extension is not built"
            ) from None
        _impl = _kernels_py
        _name = "python"

ACT_IDENTITY = _kernels_py.ACT_IDENTITY
ACT_RELU = _kernels_py.ACT_RELU
ACT_TANH = _kernels_py.ACT_TANH
ACT_MISH = _kernels_py.ACT_MISH

ACTIVATION_IDS = {
    "identity": ACT_IDENTITY,
    "relu": ACT_RELU,
    "tanh": ACT_TANH,
    "mish": ACT_MISH,
}

dense_vec_forward = _impl.dense_vec_forward
dense_vec_backward = _impl.dense_vec_backward

# batched elementwise activations stay in numpy on both backends
act_forward = _kernels_py.act_forward
act_grad = _kernels_py.act_grad


def backend_name() -> str:
    return _name
