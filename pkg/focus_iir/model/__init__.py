from .spectral import ChunkSpectrum, chunk_fft, ichunk_fft, apply_filters
from .hypernet import (
    GlobalConv,
    HyperMLP,
    HyperNetwork,
    squash,
    global_conv,
    make_embedding,
    generate_theta,
    causal_shift,
    init_hypernet,
)
from .attention import chunk, dechunk, causal_mask, chunked_causal_attention, full_causal_attention
from .layer import FocusLayer, focus_forward
from .focus import FocusBlock, FocusModel, model_forward

__all__ = [
    "ChunkSpectrum",
    "chunk_fft",
    "ichunk_fft",
    "apply_filters",
    "GlobalConv",
    "HyperMLP",
    "HyperNetwork",
    "squash",
    "global_conv",
    "make_embedding",
    "generate_theta",
    "causal_shift",
    "init_hypernet",
    "chunk",
    "dechunk",
    "causal_mask",
    "chunked_causal_attention",
    "full_causal_attention",
    "FocusLayer",
    "focus_forward",
    "FocusBlock",
    "FocusModel",
    "model_forward",
]
