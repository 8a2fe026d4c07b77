"""
Tabular exports of filter responses, written as CSV by the CLI.
"""
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .core import Theta, freq_response, impulse_response


def _labels(n: int, labels: Optional[Sequence[str]]) -> Sequence[str]:
    if labels is None:
        return [f"filter{i}" for i in range(n)]
    if len(labels) != n:
        raise ValueError(f"Expected {n} labels, got {len(labels)}")
    return labels


def impulse_response_frame(thetas: Sequence[Theta], n_steps: int, labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """One row per time step, one column per filter."""
    frame = pd.DataFrame({"index": np.arange(n_steps)})
    for label, theta in zip(_labels(len(thetas), labels), thetas):
        frame[label] = impulse_response(theta, n_steps)
    return frame


def freq_response_frame(thetas: Sequence[Theta], nfft: int, labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Magnitude response at f = k/nfft: one row per frequency, one column per filter."""
    f = np.arange(nfft) / nfft
    frame = pd.DataFrame({"frequency": f})
    for label, theta in zip(_labels(len(thetas), labels), thetas):
        frame[label] = np.abs(freq_response(theta, f))
    return frame


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


__all__ = ["impulse_response_frame", "freq_response_frame", "write_csv"]
