
from .ops import (
    REAL,
    COMPLEX,
    tensor,
    is_power_of_two,
    broadcast_shape,
    elementwise,
    matmul,
    softmax_lastdim,
    fft_lastdim,
    ifft_lastdim,
    adaptive_maxpool_time,
    backward,
)
from .checkpoint import Checkpoint, save_named_tensors, load_named_tensors

__all__ = [
    "REAL",
    "COMPLEX",
    "tensor",
    "is_power_of_two",
    "broadcast_shape",
    "elementwise",
    "matmul",
    "softmax_lastdim",
    "fft_lastdim",
    "ifft_lastdim",
    "adaptive_maxpool_time",
    "backward",
    "Checkpoint",
    "save_named_tensors",
    "load_named_tensors",
]
