"""
Chunked causal attention: the sequence is split into non-overlapping chunks of length M and
one small attention head runs over every chunk in parallel, with no attention across chunks.
"""
import logging
import math
from typing import Optional

import torch
import torch.nn.functional as F
from einops import rearrange

from ..errors import ConfigError, DimensionError
from ..tensor.ops import REAL, matmul, softmax_lastdim

logger = logging.getLogger(__name__)


def chunk(x: torch.Tensor, M: int, pad: bool = False) -> torch.Tensor:
    """``(..., L, D)`` -> ``(..., C, M, D)``; with ``pad`` the tail is zero-filled up to a whole chunk."""
    L = x.shape[-2]
    if M < 1:
        raise ConfigError(f"Chunk length must be >= 1, got {M}")
    remainder = L % M
    if remainder:
        if not pad:
            raise ConfigError(f"Sequence length {L} is not a multiple of the chunk length {M}")
        logger.debug(f"Padding length {L} by {M - remainder} for chunk length {M}")
        x = F.pad(x, (0, 0, 0, M - remainder))
    return rearrange(x, "... (c m) d -> ... c m d", m=M)


def dechunk(x: torch.Tensor, length: Optional[int] = None) -> torch.Tensor:
    """Inverse of ``chunk``; ``length`` drops padding added on the way in."""
    out = rearrange(x, "... c m d -> ... (c m) d")
    return out if length is None else out[..., :length, :]


def causal_mask(M: int, device=None) -> torch.Tensor:
    """Additive ``(M, M)`` mask: 0 on and below the diagonal, -inf above."""
    upper = torch.ones(M, M, dtype=torch.bool, device=device).triu(diagonal=1)
    return torch.zeros(M, M, dtype=REAL, device=device).masked_fill(upper, float("-inf"))


def chunked_causal_attention(
    x_chunks: torch.Tensor,
    xf_chunks: torch.Tensor,
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
) -> torch.Tensor:
    """
    Queries from the unfiltered stream, keys and values from the filtered one.

    Args:
        x_chunks: ``(..., C, M, D)`` chunked input.
        xf_chunks: ``(..., C, M, D)`` chunked filtered input.
        q, k, v: ``(D, D_att)`` projections.

    Returns:
        ``(..., C, M, D_att)``.
    """
    if x_chunks.shape != xf_chunks.shape:
        raise DimensionError(f"Chunk shapes differ: {tuple(x_chunks.shape)} vs {tuple(xf_chunks.shape)}")
    if x_chunks.dim() < 3:
        raise DimensionError(f"Expected (..., C, M, D) chunks, got {tuple(x_chunks.shape)}")
    if not (q.shape == k.shape == v.shape):
        raise DimensionError(f"Projection shapes differ: {tuple(q.shape)}, {tuple(k.shape)}, {tuple(v.shape)}")
    M = x_chunks.shape[-2]
    d_att = q.shape[-1]
    queries = matmul(x_chunks, q)
    keys = matmul(xf_chunks, k)
    values = matmul(xf_chunks, v)
    scores = matmul(queries, keys.transpose(-1, -2)) / math.sqrt(d_att)
    weights = softmax_lastdim(scores, causal_mask(M, device=scores.device))
    return matmul(weights, values)


def full_causal_attention(
    x: torch.Tensor,
    xf: torch.Tensor,
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
) -> torch.Tensor:
    """Unchunked reference over the whole ``(..., L, D)`` sequence; quadratic in L."""
    out = chunked_causal_attention(x.unsqueeze(-3), xf.unsqueeze(-3), q, k, v)
    return out.squeeze(-3)


__all__ = ["chunk", "dechunk", "causal_mask", "chunked_causal_attention", "full_causal_attention"]
