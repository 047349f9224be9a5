"""Bit-exact checkpointing for networks and optimizer state.

Format: a single ``.npz`` archive.  For every network ``<name>`` there is one
``<name>/n_layers`` scalar and, per layer ``i``, arrays ``<name>/Li/weight``,
``<name>/Li/bias``, ``<name>/Li/mask`` plus a ``<name>/Li/activation`` string.
Adam states add ``<name>/adam/...`` arrays and scalars.  A ``meta`` entry
stores caller JSON.  float64 arrays round-trip bit-exactly through ``.npz``.
"""

from __future__ import annotations

import json

import numpy as np

from .adam import AdamState
from .net import DenseLayer, DenseNet


def _pack_net(name: str, net: DenseNet, out: dict) -> None:
    out[f"{name}/n_layers"] = np.array(len(net.layers))
    for i, layer in enumerate(net.layers):
        out[f"{name}/L{i}/weight"] = layer.weight
        out[f"{name}/L{i}/bias"] = layer.bias
        out[f"{name}/L{i}/mask"] = layer.mask
        out[f"{name}/L{i}/activation"] = np.array(layer.activation)


def _unpack_net(name: str, data) -> DenseNet:
    n_layers = int(data[f"{name}/n_layers"])
    layers = []
    for i in range(n_layers):
        layers.append(
            DenseLayer(
                weight=data[f"{name}/L{i}/weight"],
                bias=data[f"{name}/L{i}/bias"],
                activation=str(data[f"{name}/L{i}/activation"]),
                mask=data[f"{name}/L{i}/mask"],
            )
        )
    return DenseNet(layers)


def _pack_adam(name: str, state: AdamState, out: dict) -> None:
    out[f"{name}/adam/scalars"] = np.array(
        [state.lr, state.beta1, state.beta2, state.eps, float(state.step)]
    )
    for i, ((mw, mb), (vw, vb)) in enumerate(zip(state.m, state.v)):
        out[f"{name}/adam/L{i}/mw"] = mw
        out[f"{name}/adam/L{i}/mb"] = mb
        out[f"{name}/adam/L{i}/vw"] = vw
        out[f"{name}/adam/L{i}/vb"] = vb


def _unpack_adam(name: str, data, n_layers: int) -> AdamState:
    lr, beta1, beta2, eps, step = data[f"{name}/adam/scalars"]
    state = AdamState(lr=float(lr), beta1=float(beta1), beta2=float(beta2), eps=float(eps))
    state.step = int(step)
    for i in range(n_layers):
        state.m.append((data[f"{name}/adam/L{i}/mw"], data[f"{name}/adam/L{i}/mb"]))
        state.v.append((data[f"{name}/adam/L{i}/vw"], data[f"{name}/adam/L{i}/vb"]))
    return state


def save_checkpoint(
    path: str,
    nets: dict[str, DenseNet],
    adam_states: dict[str, AdamState] | None = None,
    meta: dict | None = None,
) -> None:
    arrays: dict = {"net_names": np.array(sorted(nets))}
    for name in sorted(nets):
        _pack_net(name, nets[name], arrays)
    adam_states = adam_states or {}
    arrays["adam_names"] = np.array(sorted(adam_states))
    for name in sorted(adam_states):
        _pack_adam(name, adam_states[name], arrays)
    arrays["meta"] = np.array(json.dumps(meta or {}, sort_keys=True))
    np.savez(path, **arrays)


def load_checkpoint(
    path: str,
) -> tuple[dict[str, DenseNet], dict[str, AdamState], dict]:
    with np.load(path, allow_pickle=False) as data:
        nets = {str(n): _unpack_net(str(n), data) for n in data["net_names"]}
        adam_states = {
            str(n): _unpack_adam(str(n), data, len(nets[str(n)].layers))
            for n in data["adam_names"]
        }
        meta = json.loads(str(data["meta"]))
    return nets, adam_states, meta
