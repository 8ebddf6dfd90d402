"""Minimal dense-tensor engine: reverse-mode autodiff, special functions,
deterministic sampling, Adam, and the named-tensor checkpoint container."""

from . import special
from .adam import Adam, zero_grads
from .checkpoint import MAGIC, load_tensors, save_tensors
from .rng import Rng, sample_beta
from .tensor import (
    Tape,
    Tensor,
    add,
    clamp_min,
    concat,
    div,
    exp,
    log,
    log_gamma,
    matmul,
    mul,
    neg,
    pick,
    reduce_max,
    reduce_mean,
    reduce_std,
    reduce_sum,
    reshape,
    sigmoid,
    softmax,
    softplus,
    sqrt,
    sub,
    take_rows,
    tanh,
    transpose,
)

__all__ = [
    "Adam",
    "MAGIC",
    "Rng",
    "Tape",
    "Tensor",
    "add",
    "clamp_min",
    "concat",
    "div",
    "exp",
    "load_tensors",
    "log",
    "log_gamma",
    "matmul",
    "mul",
    "neg",
    "pick",
    "reduce_max",
    "reduce_mean",
    "reduce_std",
    "reduce_sum",
    "reshape",
    "sample_beta",
    "save_tensors",
    "sigmoid",
    "softmax",
    "softplus",
    "special",
    "sqrt",
    "sub",
    "take_rows",
    "tanh",
    "transpose",
    "zero_grads",
]
