"""
Chunked FFT analysis/synthesis and frequency-domain application of the IIR filter bank.

Inputs are ``(..., L, D)``; the input is cut into non-overlapping time bins of length
``nfft`` and each bin is transformed on its own.
"""
import logging
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from einops import rearrange

from ..errors import ConfigError, ContractError, DimensionError
from ..iir.core import response_bank
from ..tensor.ops import fft_lastdim, ifft_lastdim

logger = logging.getLogger(__name__)

IMAG_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class ChunkSpectrum:
    """Per-bin spectrum, ``data`` shaped ``(..., nbins, nfft, D)``."""
    data: torch.Tensor
    nbins: int
    nfft: int
    length: int  # time length before any right padding

    @property
    def padded(self) -> bool:
        return self.nbins * self.nfft != self.length


def chunk_fft(x: torch.Tensor, nfft: int, pad: bool = False) -> ChunkSpectrum:
    """
    Transform each length-``nfft`` time bin of ``x``.

    Args:
        x: ``(..., L, D)`` real signal.
        nfft: bin length, a power of two.
        pad: right-pad with zeros to the next multiple of ``nfft`` instead of failing.
    """
    L = x.shape[-2]
    remainder = L % nfft
    if remainder:
        if not pad:
            raise ConfigError(f"Sequence length {L} is not a multiple of nfft={nfft}")
        logger.debug(f"Padding length {L} by {nfft - remainder} for nfft={nfft}")
        x = F.pad(x, (0, 0, 0, nfft - remainder))
    bins = rearrange(x, "... (n r) d -> ... n d r", r=nfft)
    spectrum = rearrange(fft_lastdim(bins), "... n d r -> ... n r d")
    return ChunkSpectrum(data=spectrum, nbins=spectrum.shape[-3], nfft=nfft, length=L)


def _synthesize(X: ChunkSpectrum, spectrum: torch.Tensor, check_residual: bool) -> torch.Tensor:
    """Inverse-transform ``(..., n, d, r)`` bins, concatenate, take the real part, truncate."""
    signal = ifft_lastdim(spectrum)
    if check_residual:
        with torch.no_grad():
            scale = signal.real.abs().max().clamp_min(1.0)
            residual = float(signal.imag.abs().max() / scale) if signal.numel() else 0.0
        if residual > IMAG_RESIDUAL_TOL:
            raise ContractError(f"Imaginary residual {residual:.3e} after synthesis exceeds {IMAG_RESIDUAL_TOL}")
    out = rearrange(signal.real, "... n d r -> ... (n r) d")
    return out[..., :X.length, :]


def ichunk_fft(X: ChunkSpectrum, check_residual: bool = True) -> torch.Tensor:
    """Inverse of ``chunk_fft`` (no filtering)."""
    return _synthesize(X, rearrange(X.data, "... n r d -> ... n d r"), check_residual)


def apply_filters(X: ChunkSpectrum, theta: torch.Tensor, check_residual: bool = True) -> torch.Tensor:
    """
    Filter every bin with its conjugated IIR responses, sum over the filter bank and synthesize.

    Args:
        X: chunk spectrum ``(..., nbins, nfft, D)``.
        theta: coefficients ``(..., nbins, D, F, 2)``, already causally shifted.
        check_residual: fail if the synthesis is not real to within ``IMAG_RESIDUAL_TOL``.

    Returns:
        ``(..., L, D)`` real filtered signal.
    """
    if theta.dim() < 4 or theta.shape[-1] != 2:
        raise DimensionError(f"theta must be (..., nbins, D, F, 2), got {tuple(theta.shape)}")
    if theta.shape[-4] != X.nbins or theta.shape[-3] != X.data.shape[-1]:
        raise DimensionError(
            f"theta has {theta.shape[-4]} bins x {theta.shape[-3]} channels, "
            f"spectrum has {X.nbins} bins x {X.data.shape[-1]} channels"
        )
    collapsed = response_bank(theta, X.nfft).conj().sum(dim=-2)  # (..., n, d, r)
    filtered = rearrange(X.data, "... n r d -> ... n d r") * collapsed
    return _synthesize(X, filtered, check_residual)


__all__ = ["ChunkSpectrum", "chunk_fft", "ichunk_fft", "apply_filters", "IMAG_RESIDUAL_TOL"]
