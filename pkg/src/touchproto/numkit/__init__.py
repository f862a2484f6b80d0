"""Minimal dense-tensor numerics with reverse-mode autodiff and Adam."""

from .checkpoint import CheckpointError, ParamSet, load_params, save_params
from .gradcheck import format_grad_report, grad_check
from .layers import backward, forward_fc, forward_gru_step, init_fc, init_gru
from .optim import AdamState, adam_step
from .tensor import (
    ContractError,
    ShapeError,
    Tensor,
    constant,
    no_grad,
    parameter,
)
from . import tensor

__all__ = [
    "AdamState",
    "CheckpointError",
    "ContractError",
    "ParamSet",
    "ShapeError",
    "Tensor",
    "adam_step",
    "backward",
    "constant",
    "format_grad_report",
    "forward_fc",
    "forward_gru_step",
    "grad_check",
    "init_fc",
    "init_gru",
    "load_params",
    "no_grad",
    "parameter",
    "save_params",
    "tensor",
]
