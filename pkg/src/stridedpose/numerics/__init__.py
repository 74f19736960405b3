"""Dense float64 primitives with tape-based reverse-mode differentiation."""

from .gradcheck import grad_check
from .instrument import MacCounter, count_macs, mac_scope
from .ops import (
    add,
    batch_norm_1d,
    conv1d_strided,
    conv_output_length,
    dropout,
    l2_norm,
    layer_norm,
    linear,
    matmul,
    maxpool1d,
    mul,
    relu,
    reshape,
    softmax,
    sub,
    sum_all,
    take,
    transpose,
)
from .rng import RngStream
from .tensor import (
    ConfigError,
    DimensionError,
    NumericError,
    TapeError,
    Tensor,
    as_tensor,
    backward,
    leaves,
    no_grad,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "MacCounter",
    "NumericError",
    "RngStream",
    "TapeError",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "batch_norm_1d",
    "conv1d_strided",
    "conv_output_length",
    "count_macs",
    "dropout",
    "grad_check",
    "l2_norm",
    "layer_norm",
    "leaves",
    "linear",
    "mac_scope",
    "matmul",
    "maxpool1d",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "softmax",
    "sub",
    "sum_all",
    "take",
    "transpose",
]
