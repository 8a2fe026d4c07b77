"""
Per-bin frequency responses of the generated IIR filters of a trained model.
"""
import logging
from typing import Optional

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, ConfigDict

from ..errors import ConfigError
from ..iir.core import response_bank
from ..iir.export import freq_response_frame, impulse_response_frame
from ..model.focus import FocusModel

logger = logging.getLogger(__name__)


class FilterReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    magnitude: pd.DataFrame  # rows: frequency index; columns: bin{r}
    summary: pd.DataFrame  # one row per bin
    impulse: pd.DataFrame  # rows: time step; columns: bin{r}
    response: pd.DataFrame  # rows: frequency; columns: bin{r}, first filter of the channel only
    query_bin: Optional[int] = None

    def focus_ratio(self, bin_index: Optional[int] = None) -> float:
        """Peak magnitude of ``bin_index`` (default: the query bin) over the median bin peak."""
        r = self.query_bin if bin_index is None else bin_index
        if r is None:
            raise ConfigError("No bin given and no query position known")
        peaks = self.summary["peak_magnitude"].to_numpy()
        return float(peaks[r] / np.median(peaks))


def inspect_filters(
    model: FocusModel,
    tokens: torch.Tensor,
    layer: int = 0,
    channel: Optional[int] = None,
    applied: bool = False,
    query_pos: Optional[int] = None,
    impulse_steps: int = 64,
) -> FilterReport:
    """
    Magnitude response ``|sum_f H_f(k/nfft)|`` of every bin for one token sequence.

    Args:
        model: model whose hypernetwork generates the filters.
        tokens: ``(L,)`` token ids.
        layer: which Focus layer to read.
        channel: a single channel, or the mean over channels when omitted.
        applied: report the causally shifted coefficients the spectral path uses instead of
            the ones generated from each bin.
        query_pos: position of the recall query key, marked in the summary.
        impulse_steps: length of the exported impulse responses.
    """
    config = model.config
    if not 0 <= layer < config.n_layers:
        raise ConfigError(f"layer must be in [0, {config.n_layers}), got {layer}")
    if channel is not None and not 0 <= channel < config.width:
        raise ConfigError(f"channel must be in [0, {config.width}), got {channel}")
    coeffs = model.coefficients(tokens.reshape(1, -1))[layer]
    theta = coeffs["applied" if applied else "generated"].reshape(-1, config.width, config.filters, 2)
    nbins = theta.shape[0]
    with torch.no_grad():
        response = response_bank(theta, config.nfft).sum(dim=-2).abs()  # (nbins, D, nfft)
    magnitude = response[:, channel, :] if channel is not None else response.mean(dim=1)
    magnitude = magnitude.numpy()

    frame = pd.DataFrame({
        "frequency_index": np.arange(config.nfft),
        "frequency": np.arange(config.nfft) / config.nfft,
    })
    for r in range(nbins):
        frame[f"bin{r}"] = magnitude[r]

    query_bin = None if query_pos is None else int(query_pos) // config.nfft
    peaks = magnitude.max(axis=1)
    summary = pd.DataFrame({
        "bin": np.arange(nbins),
        "peak_magnitude": peaks,
        "peak_frequency_index": magnitude.argmax(axis=1),
        "mean_magnitude": magnitude.mean(axis=1),
        "peak_over_median": peaks / np.median(peaks),
        "query_bin": [r == query_bin for r in range(nbins)],
    })

    filter0 = [tuple(float(v) for v in t) for t in theta[:, channel if channel is not None else 0, 0, :].numpy()]
    labels = [f"bin{r}" for r in range(nbins)]
    impulse = impulse_response_frame(filter0, impulse_steps, labels=labels)
    response = freq_response_frame(filter0, config.nfft, labels=labels)
    logger.info(f"Inspected {nbins} bins of layer {layer}; peak spread {peaks.max() / peaks.min():.3g}x")
    return FilterReport(magnitude=frame, summary=summary, impulse=impulse, response=response, query_bin=query_bin)


__all__ = ["FilterReport", "inspect_filters"]
