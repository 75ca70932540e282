"""Minimal reverse-mode differentiation with the layers the navigation model needs."""

from gcg.autodiff import ops
from gcg.autodiff.gradcheck import check_store, numeric_grad, rel_error
from gcg.autodiff.layers import affine, conv2d, mi_lstm_cell
from gcg.autodiff.optim import AdamConfig, adam_step
from gcg.autodiff.params import ParamStore, load_checkpoint, save_checkpoint
from gcg.autodiff.tape import Tape, Tensor, active_tape, backprop

__all__ = [
    "AdamConfig",
    "ParamStore",
    "Tape",
    "Tensor",
    "active_tape",
    "adam_step",
    "affine",
    "backprop",
    "check_store",
    "conv2d",
    "load_checkpoint",
    "mi_lstm_cell",
    "numeric_grad",
    "ops",
    "rel_error",
    "save_checkpoint",
]
