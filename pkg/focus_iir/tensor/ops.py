"""
Dense-tensor primitives used by the Focus architecture.

Tensors are ``torch.Tensor`` objects in float64 (real) or complex128 (complex). Reverse-mode
differentiation is recorded by torch's autograd graph, which plays the role of the tape:
nodes are appended in topological order as operations run and ``backward`` replays them once
in reverse.
"""
import logging
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F

from ..errors import ConfigError, ContractError, DimensionError

logger = logging.getLogger(__name__)

REAL = torch.float64
COMPLEX = torch.complex128

_UNARY: Dict[str, Callable[[torch.Tensor], torch.Tensor]] = {
    "neg": torch.neg,
    "sigmoid": torch.sigmoid,
    "silu": F.silu,
    "exp": torch.exp,
    "log2": torch.log2,
    "relu": torch.relu,
}

_BINARY: Dict[str, Callable[[torch.Tensor, torch.Tensor], torch.Tensor]] = {
    "add": torch.add,
    "sub": torch.sub,
    "mul": torch.mul,
    "div": torch.div,
}


def tensor(data, requires_grad: bool = False, dtype: torch.dtype = REAL) -> torch.Tensor:
    """Build a float64 (default) tensor, optionally a differentiable leaf."""
    return torch.tensor(data, dtype=dtype, requires_grad=requires_grad)


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def broadcast_shape(a: Sequence[int], b: Sequence[int]) -> Tuple[int, ...]:
    """Trailing-dimension broadcast of two shapes, or DimensionError."""
    try:
        return tuple(torch.broadcast_shapes(tuple(a), tuple(b)))
    except RuntimeError as e:
        raise DimensionError(f"Shapes {tuple(a)} and {tuple(b)} do not broadcast") from e


def elementwise(op_kind: str, a: torch.Tensor, b: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Apply an elementwise operation.

    Args:
        op_kind: one of add, sub, mul, div (binary) or neg, sigmoid, silu, exp, log2, relu (unary).
        a: first operand.
        b: second operand for binary kinds; broadcast against ``a`` over trailing dimensions.
    """
    if op_kind in _UNARY:
        if b is not None:
            raise ContractError(f"'{op_kind}' is unary but got a second operand")
        return _UNARY[op_kind](a)
    if op_kind in _BINARY:
        if b is None:
            raise ContractError(f"'{op_kind}' needs a second operand")
        broadcast_shape(a.shape, b.shape)
        return _BINARY[op_kind](a, b)
    raise ContractError(f"Unknown elementwise op: {op_kind}")


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Batched matrix product over leading dimensions."""
    if a.dim() < 1 or b.dim() < 1:
        raise DimensionError("matmul needs at least 1-D operands")
    inner_b = b.shape[-2] if b.dim() >= 2 else b.shape[0]
    if a.shape[-1] != inner_b:
        raise DimensionError(f"matmul inner dimensions disagree: {tuple(a.shape)} x {tuple(b.shape)}")
    if a.dim() > 2 and b.dim() > 2:
        broadcast_shape(a.shape[:-2], b.shape[:-2])
    return torch.matmul(a, b)


def softmax_lastdim(
    a: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
    return_masked_rows: bool = False,
) -> Union[torch.Tensor, Tuple[torch.Tensor, torch.Tensor]]:
    """
    Softmax over the last dimension with an optional additive mask.

    Args:
        a: logits.
        mask: additive mask broadcastable to ``a``; 0 keeps an entry, -inf drops it.
        return_masked_rows: also return the boolean flag of rows with every entry masked.

    Rows with every entry masked come back as zeros and are flagged.
    """
    logits = a if mask is None else elementwise("add", a, mask)
    dead = torch.isneginf(logits).all(dim=-1, keepdim=True)
    if bool(dead.any()):
        logger.warning(f"softmax over {int(dead.sum())} fully masked row(s); returning zeros")
        logits = logits.masked_fill(dead, 0.0)
    # torch subtracts the row max internally
    out = torch.softmax(logits, dim=-1).masked_fill(dead, 0.0)
    if return_masked_rows:
        return out, dead.squeeze(-1)
    return out


def _check_fft_length(n: int) -> None:
    if not is_power_of_two(n):
        raise ConfigError(f"FFT length must be a power of two, got {n}")


def fft_lastdim(a: torch.Tensor) -> torch.Tensor:
    """Unnormalized forward DFT over the last dimension (complex output)."""
    _check_fft_length(a.shape[-1])
    if not a.is_complex():
        a = a.to(COMPLEX)
    return torch.fft.fft(a, dim=-1)


def ifft_lastdim(a: torch.Tensor) -> torch.Tensor:
    """Inverse DFT over the last dimension, scaled by 1/N."""
    _check_fft_length(a.shape[-1])
    if not a.is_complex():
        a = a.to(COMPLEX)
    return torch.fft.ifft(a, dim=-1)


def adaptive_maxpool_time(a: torch.Tensor, out_len: int) -> torch.Tensor:
    """
    Max-pool the time axis (dim -2 of ``(..., T, D)``) down to ``out_len`` windows.

    Window i covers ``[floor(i*T/out_len), floor((i+1)*T/out_len))``. The gradient of each
    window goes to its first maximal element.
    """
    T = a.shape[-2]
    if out_len < 1 or out_len > T:
        raise DimensionError(f"Cannot pool time length {T} to {out_len}")
    if T % out_len == 0:
        windows = a.reshape(*a.shape[:-2], out_len, T // out_len, a.shape[-1])
        return windows.max(dim=-2).values
    bounds = [(i * T) // out_len for i in range(out_len + 1)]
    pooled = [a[..., lo:hi, :].max(dim=-2).values for lo, hi in zip(bounds[:-1], bounds[1:])]
    return torch.stack(pooled, dim=-2)


def backward(loss: torch.Tensor) -> None:
    """Populate ``.grad`` on every leaf reachable from a scalar loss."""
    if loss.numel() != 1 or loss.dim() > 1:
        raise ContractError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    if not loss.requires_grad:
        raise ContractError("loss is not connected to any differentiable leaf")
    loss.reshape(()).backward()


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
]
