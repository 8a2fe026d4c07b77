"""
A single Focus layer: adaptive IIR filtering per time bin, chunked causal attention over the
filtered stream and gated residual output.
"""
import logging
import math
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import FocusConfig
from ..errors import DimensionError
from ..tensor.ops import REAL
from .attention import chunk, chunked_causal_attention, dechunk
from .hypernet import HyperNetwork, causal_shift
from .spectral import apply_filters, chunk_fft

logger = logging.getLogger(__name__)

PROJ_STD = 0.02


class FocusLayer(nn.Module):
    """
    Focus layer on ``(..., L, D)`` inputs.

    Without the ablation flag the filter coefficients come from the hypernetwork; with it they
    are ``sigmoid(static_theta)`` broadcast over bins. Both pass through the same causal shift.
    """

    def __init__(self, config: FocusConfig, own_embedding: bool = True):
        super(FocusLayer, self).__init__()
        self.config = config
        D, A, Fb = config.width, config.d_att, config.filters
        self.q = nn.Parameter(torch.zeros(D, A, dtype=REAL))
        self.k = nn.Parameter(torch.zeros(D, A, dtype=REAL))
        self.v = nn.Parameter(torch.zeros(D, A, dtype=REAL))
        self.w_o = nn.Parameter(torch.zeros(A, D, dtype=REAL)) if A != D else None
        self.w_gamma = nn.Parameter(torch.zeros(D, D, dtype=REAL))
        self.w_phi = nn.Parameter(torch.zeros(D, D, dtype=REAL))
        self.w_h = nn.Parameter(torch.zeros(D, D, dtype=REAL))
        self.u_h = nn.Parameter(torch.zeros(D, D, dtype=REAL))
        self.b_gamma = nn.Parameter(torch.zeros(D, dtype=REAL))
        self.b_phi = nn.Parameter(torch.zeros(D, dtype=REAL))
        self.b_h = nn.Parameter(torch.zeros(D, dtype=REAL))
        if config.ablation:
            self.hyper = None
            self.static_theta = nn.Parameter(torch.zeros(1, D, Fb, 2, dtype=REAL))
        else:
            self.hyper = HyperNetwork(config, with_conv=own_embedding)
            self.static_theta = None

    def reset_parameters(self, generator: Optional[torch.Generator] = None) -> None:
        with torch.no_grad():
            for w in (self.q, self.k, self.v, self.w_o, self.w_gamma, self.w_phi, self.w_h, self.u_h):
                if w is not None:
                    w.normal_(0.0, PROJ_STD, generator=generator)
            for b in (self.b_gamma, self.b_phi, self.b_h):
                b.zero_()
            if self.static_theta is not None:
                self.static_theta.zero_()
        if self.hyper is not None:
            self.hyper.reset_parameters(generator)

    def coefficients(self, x: torch.Tensor, embedding: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Coefficients for the bins of ``x``.

        Returns:
            ``(generated, applied)``, both ``(..., nbins, D, F, 2)``; ``applied`` is the causally
            shifted tensor the spectral path uses.
        """
        nbins = math.ceil(x.shape[-2] / self.config.nfft)
        if self.static_theta is not None:
            theta = torch.sigmoid(self.static_theta).expand(nbins, *self.static_theta.shape[1:])
        else:
            theta = self.hyper(x, nbins, e=embedding)
        return theta, causal_shift(theta)

    def gates(self, x_f: torch.Tensor, y: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        """Reset gate gamma, update gate phi, candidate z; o = phi*z + (1-phi)*x."""
        if y.shape[-1] != x_f.shape[-1]:
            if self.w_o is None:
                raise DimensionError(f"Attention output width {y.shape[-1]} != model width {x_f.shape[-1]}")
            y = y @ self.w_o
        gamma = F.silu(x_f @ self.w_gamma + self.b_gamma)
        phi = torch.sigmoid(x_f @ self.w_phi + self.b_phi)
        z = F.silu(x_f @ self.w_h + (gamma * y) @ self.u_h + self.b_h)
        return torch.addcmul(x, phi, z - x)

    def forward(
        self,
        x: torch.Tensor,
        embedding: Optional[torch.Tensor] = None,
        residual: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        Args:
            x: ``(..., L, D)`` input to filter and attend over.
            embedding: precomputed hypernetwork embedding when it is shared across layers.
            residual: the skip input of the update gate; defaults to ``x``.
        """
        if x.shape[-1] != self.config.width:
            raise DimensionError(f"Expected width {self.config.width}, got {x.shape[-1]}")
        L = x.shape[-2]
        _, theta = self.coefficients(x, embedding)
        x_f = apply_filters(chunk_fft(x, self.config.nfft, pad=True), theta)
        M = min(self.config.chunk, L)
        y = chunked_causal_attention(chunk(x, M, pad=True), chunk(x_f, M, pad=True), self.q, self.k, self.v)
        y = dechunk(y, L)
        return self.gates(x_f, y, x if residual is None else residual)


def focus_forward(
    layer: FocusLayer,
    x: torch.Tensor,
    embedding: Optional[torch.Tensor] = None,
    residual: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    return layer(x, embedding=embedding, residual=residual)


__all__ = ["FocusLayer", "focus_forward"]
