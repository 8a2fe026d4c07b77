"""
The hypernetwork H that turns the input sequence into adaptive IIR coefficients.

    e     = MaxPool(GlobalConv(x))        (..., nbins, D, O)
    theta = sigmoid(sigmoid(e W1 + b1) W2 + b2)    (..., nbins, D, F, 2)

followed by a one-bin causal shift so bin i is filtered with coefficients computed from bin i-1.
"""
import math
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from ..config import FocusConfig
from ..errors import ConfigError, DimensionError
from ..tensor.ops import REAL, adaptive_maxpool_time

LAST_LAYER_SCALE = 0.1


def squash(k: torch.Tensor, lam: float) -> torch.Tensor:
    """Soft threshold: sign(k) * max(|k| - lam, 0)."""
    if lam < 0:
        raise ConfigError(f"squash lambda must be >= 0, got {lam}")
    if lam == 0:
        return k
    return torch.sign(k) * torch.relu(k.abs() - lam)


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


class GlobalConv(nn.Module):
    """Directly learned causal long-convolution kernel, one per channel."""

    def __init__(self, l_max: int, width: int, squash_lambda: float = 1e-3):
        super(GlobalConv, self).__init__()
        if squash_lambda < 0:
            raise ConfigError(f"squash_lambda must be >= 0, got {squash_lambda}")
        self.l_max = l_max
        self.squash_lambda = squash_lambda
        self.kernel = nn.Parameter(torch.zeros(l_max, width, dtype=REAL))

    def reset_parameters(self, generator: Optional[torch.Generator] = None) -> None:
        with torch.no_grad():
            self.kernel.normal_(0.0, 1.0 / math.sqrt(self.l_max), generator=generator)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return global_conv(x, self.kernel, self.squash_lambda)


class HyperMLP(nn.Module):
    """Two sigmoid layers mapping O pooled features to 2F coefficients per (bin, channel)."""

    def __init__(self, oversampling: int, hidden: int, filters: int):
        super(HyperMLP, self).__init__()
        self.filters = filters
        self.w1 = nn.Parameter(torch.zeros(oversampling, hidden, dtype=REAL))
        self.b1 = nn.Parameter(torch.zeros(hidden, dtype=REAL))
        self.w2 = nn.Parameter(torch.zeros(hidden, 2 * filters, dtype=REAL))
        self.b2 = nn.Parameter(torch.zeros(2 * filters, dtype=REAL))

    def reset_parameters(self, generator: Optional[torch.Generator] = None) -> None:
        """Xavier-uniform first layer; 0.1-scaled Xavier last layer with zero bias."""
        o, h = self.w1.shape
        with torch.no_grad():
            bound1 = xavier_bound(o, h)
            self.w1.uniform_(-bound1, bound1, generator=generator)
            self.b1.zero_()
            bound2 = LAST_LAYER_SCALE * xavier_bound(h, 2 * self.filters)
            self.w2.uniform_(-bound2, bound2, generator=generator)
            self.b2.zero_()

    def forward(self, e: torch.Tensor) -> torch.Tensor:
        return generate_theta(e, self, self.filters)


def global_conv(x: torch.Tensor, kernel: torch.Tensor, squash_lambda: float = 0.0) -> torch.Tensor:
    """
    Causal per-channel linear convolution of ``x`` ``(..., L, D)`` with the squashed kernel.

    Zero-padded to 2L so the FFT product is a linear, not circular, convolution.
    """
    L = x.shape[-2]
    if L > kernel.shape[0]:
        raise ConfigError(f"Sequence length {L} exceeds the global-conv kernel length {kernel.shape[0]}")
    if x.shape[-1] != kernel.shape[-1]:
        raise DimensionError(f"Input width {x.shape[-1]} does not match kernel width {kernel.shape[-1]}")
    k = rearrange(squash(kernel[:L], squash_lambda), "l d -> d l")
    u = rearrange(x, "... l d -> ... d l")
    n = 2 * L
    y = torch.fft.irfft(torch.fft.rfft(u, n=n) * torch.fft.rfft(k, n=n), n=n)[..., :L]
    return rearrange(y, "... d l -> ... l d")


def make_embedding(
    x: torch.Tensor,
    conv: GlobalConv,
    oversampling: int,
    nbins: int,
    nfft: Optional[int] = None,
) -> torch.Tensor:
    """
    Pool the convolved signal to ``oversampling * nbins`` steps and regroup per bin.

    Args:
        nfft: bin length. When given, the convolved signal is zero-padded to ``nbins * nfft``
            so the O pooling windows of bin r lie inside ``[r * nfft, (r + 1) * nfft)``.

    Returns:
        ``(..., nbins, D, O)``: the O pooled values covering bin r are its feature vector.
    """
    y = conv(x)
    if nfft is not None:
        L = x.shape[-2]
        if L > nbins * nfft or L <= (nbins - 1) * nfft:
            raise DimensionError(f"Sequence length {L} does not split into {nbins} bins of {nfft}")
        if oversampling > nfft:
            raise ConfigError(f"oversampling {oversampling} exceeds the bin length {nfft}")
        y = F.pad(y, (0, 0, 0, nbins * nfft - L))
    if y.shape[-2] < oversampling * nbins:
        raise ConfigError(
            f"Sequence length {y.shape[-2]} is shorter than oversampling*nbins = {oversampling * nbins}"
        )
    pooled = adaptive_maxpool_time(y, oversampling * nbins)
    return rearrange(pooled, "... (n o) d -> ... n d o", o=oversampling)


def generate_theta(e: torch.Tensor, mlp: HyperMLP, filters: int) -> torch.Tensor:
    """Map ``(..., nbins, D, O)`` embeddings to coefficients ``(..., nbins, D, F, 2)`` in (0, 1)."""
    if e.shape[-1] != mlp.w1.shape[0]:
        raise DimensionError(f"Embedding has {e.shape[-1]} features, MLP expects {mlp.w1.shape[0]}")
    h = torch.sigmoid(e @ mlp.w1 + mlp.b1)
    out = torch.sigmoid(h @ mlp.w2 + mlp.b2)
    return rearrange(out, "... (f two) -> ... f two", f=filters, two=2)


def causal_shift(theta: torch.Tensor) -> torch.Tensor:
    """Shift ``(..., nbins, D, F, 2)`` right by one bin; bin 0 gets the identity filter (0, 0)."""
    neutral = torch.zeros_like(theta[..., :1, :, :, :])
    return torch.cat([neutral, theta[..., :-1, :, :, :]], dim=-4)


class HyperNetwork(nn.Module):
    """GlobalConv + HyperMLP. The conv may be shared with other layers (pass ``e`` to forward)."""

    def __init__(self, config: FocusConfig, with_conv: bool = True):
        super(HyperNetwork, self).__init__()
        self.oversampling = config.oversampling
        self.filters = config.filters
        self.nfft = config.nfft
        self.gconv = GlobalConv(config.l_max, config.width, config.squash_lambda) if with_conv else None
        self.mlp = HyperMLP(config.oversampling, config.hidden, config.filters)

    def reset_parameters(self, generator: Optional[torch.Generator] = None) -> None:
        if self.gconv is not None:
            self.gconv.reset_parameters(generator)
        self.mlp.reset_parameters(generator)

    def embed(self, x: torch.Tensor, nbins: int) -> torch.Tensor:
        if self.gconv is None:
            raise ConfigError("This hypernetwork uses a shared embedding; pass e explicitly")
        return make_embedding(x, self.gconv, self.oversampling, nbins, nfft=self.nfft)

    def forward(self, x: torch.Tensor, nbins: int, e: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Unshifted coefficients for each bin of ``x``."""
        if e is None:
            e = self.embed(x, nbins)
        return generate_theta(e, self.mlp, self.filters)


def init_hypernet(config: FocusConfig, seed: int) -> Tuple[GlobalConv, HyperMLP]:
    """Deterministically initialized global conv and coefficient MLP."""
    generator = torch.Generator().manual_seed(seed)
    conv = GlobalConv(config.l_max, config.width, config.squash_lambda)
    conv.reset_parameters(generator)
    mlp = HyperMLP(config.oversampling, config.hidden, config.filters)
    mlp.reset_parameters(generator)
    return conv, mlp


__all__ = [
    "squash",
    "xavier_bound",
    "GlobalConv",
    "HyperMLP",
    "HyperNetwork",
    "global_conv",
    "make_embedding",
    "generate_theta",
    "causal_shift",
    "init_hypernet",
]
