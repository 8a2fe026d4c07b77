"""
Byte-level character language-modelling corpus.
"""
import logging
from pathlib import Path
from typing import Tuple, Union

import torch
from torch.utils.data import Dataset

from ..errors import ConfigError, InputError

logger = logging.getLogger(__name__)

BYTE_VOCAB = 256


class CorpusDataset(Dataset):
    """
    Non-overlapping windows of ``L + 1`` bytes; item ``i`` is ``(inputs, next-byte targets)``.

    Any file works: it is read as raw bytes, so UTF-8 text becomes a byte stream over a
    vocabulary of 256.
    """

    def __init__(self, data: torch.Tensor, L: int):
        if L < 1:
            raise ConfigError(f"L must be >= 1, got {L}")
        if data.numel() < L + 1:
            raise InputError(f"Corpus has {data.numel()} bytes, need at least {L + 1} for one window")
        self.data = data.long()
        self.L = L

    @classmethod
    def from_file(cls, path: Union[str, Path], L: int) -> "CorpusDataset":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Corpus file not found: {path}")
        blob = path.read_bytes()
        logger.info(f"Loaded {len(blob)} bytes from {path}")
        return cls(torch.frombuffer(bytearray(blob), dtype=torch.uint8), L)

    def __len__(self) -> int:
        return (self.data.numel() - 1) // self.L

    def __getitem__(self, idx):
        if idx < 0:
            idx += len(self)
        if not 0 <= idx < len(self):
            raise IndexError(idx)
        window = self.data[idx * self.L: idx * self.L + self.L + 1]
        return window[:-1], window[1:]

    def split(self, test_fraction: float = 0.1) -> Tuple["CorpusDataset", "CorpusDataset"]:
        """Contiguous split: the tail of the byte stream becomes the held-out set."""
        if not 0.0 < test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
        n = len(self)
        if n < 2:
            raise InputError("Corpus too short to split into train and test windows")
        n_test = min(max(1, int(round(n * test_fraction))), n - 1)
        cut = (n - n_test) * self.L
        return CorpusDataset(self.data[:cut + 1], self.L), CorpusDataset(self.data[cut:], self.L)


__all__ = ["BYTE_VOCAB", "CorpusDataset"]
