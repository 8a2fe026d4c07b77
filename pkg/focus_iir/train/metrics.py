"""
Task losses and metrics. Recall is scored at the final position only; the char-LM at every
position.
"""
import math

import torch
import torch.nn.functional as F

from ..errors import DimensionError

LN2 = math.log(2.0)


def final_position_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Cross-entropy (nats) of the last position of ``(B, L, V)`` logits against ``(B,)`` targets."""
    return F.cross_entropy(logits[..., -1, :], targets)


def all_positions_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean next-token cross-entropy (nats) of ``(..., L, V)`` logits against ``(..., L)`` targets."""
    if logits.shape[:-1] != targets.shape:
        raise DimensionError(f"Logits {tuple(logits.shape)} do not align with targets {tuple(targets.shape)}")
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1))


def accuracy(logits: torch.Tensor, targets: torch.Tensor) -> float:
    """Fraction of samples whose final-position argmax equals the target."""
    if logits.shape[:-2] != targets.shape:
        raise DimensionError(f"Logits {tuple(logits.shape)} do not align with targets {tuple(targets.shape)}")
    if targets.numel() == 0:
        return 0.0
    hits = logits[..., -1, :].argmax(dim=-1) == targets
    return float(hits.double().mean())


def bpc(logits: torch.Tensor, targets: torch.Tensor) -> float:
    """Bits per character: mean over positions of -log2 p(target)."""
    with torch.no_grad():
        return float(all_positions_loss(logits, targets)) / LN2


__all__ = ["final_position_loss", "all_positions_loss", "accuracy", "bpc"]
