from .adam import AdamState, adam_step
from .backend import backend_name
from .checkpoint import load_checkpoint, save_checkpoint
from .net import DenseLayer, DenseNet, ForwardCache, soft_update, time_embed

__all__ = [
    "AdamState",
    "adam_step",
    "backend_name",
    "DenseLayer",
    "DenseNet",
    "ForwardCache",
    "load_checkpoint",
    "save_checkpoint",
    "soft_update",
    "time_embed",
]
