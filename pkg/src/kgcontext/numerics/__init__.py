"""Dense tensors with reverse-mode gradients, parameter stores, and checks."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .params import Adam, Params, SGD, uniform_init
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    bce_with_logits,
    concat,
    cross_entropy,
    exp,
    gather_rows,
    log,
    log_softmax,
    masked_softmax,
    matmul,
    mean,
    mul,
    pick,
    relu,
    reshape,
    segment_softmax,
    segment_sum,
    sigmoid,
    softmax,
    sqrt,
    sub,
    tanh,
    transpose,
    tsum,
)

__all__ = [
    "Adam",
    "CheckpointError",
    "GradCheckReport",
    "NonFiniteError",
    "Params",
    "SGD",
    "ShapeError",
    "Tensor",
    "add",
    "bce_with_logits",
    "concat",
    "cross_entropy",
    "exp",
    "gather_rows",
    "grad_check",
    "load_checkpoint",
    "log",
    "log_softmax",
    "masked_softmax",
    "matmul",
    "mean",
    "mul",
    "pick",
    "relu",
    "reshape",
    "save_checkpoint",
    "segment_softmax",
    "segment_sum",
    "sigmoid",
    "softmax",
    "sqrt",
    "sub",
    "tanh",
    "transpose",
    "tsum",
    "uniform_init",
]
