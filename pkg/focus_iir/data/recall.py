"""
Synthetic associative-recall data.

Every sample is a run of key/value pairs drawn from a per-sample dictionary, followed by a
query key; the model must output the value stored for it. Keys come from the lower half of the
vocabulary, values from the upper half minus the last id, which is reserved as the pad token.
"""
import hashlib
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict
from torch.utils.data import Dataset

from ..errors import ArtifactError, ConfigError
from ..tensor.checkpoint import load_named_tensors, save_named_tensors

logger = logging.getLogger(__name__)


class RecallSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    tokens: Tuple[int, ...]
    target: int
    query_pos: int  # position of the key that the final query repeats


def recall_layout(vocab: int, L: int) -> Tuple[int, int, bool]:
    """``(n_pairs, pad_id, padded)`` for a vocabulary size and sequence length."""
    if vocab < 4:
        raise ConfigError(f"Recall vocab must be >= 4, got {vocab}")
    if L < 3:
        raise ConfigError(f"Recall length must be >= 3 (one pair plus the query), got {L}")
    return (L - 1) // 2, vocab - 1, L % 2 == 0


def gen_recall_arrays(vocab: int, L: int, n: int, seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized generator: ``tokens (n, L)``, ``targets (n,)``, ``query_pos (n,)`` as int64."""
    n_pairs, pad_id, padded = recall_layout(vocab, L)
    if n < 0:
        raise ConfigError(f"Sample count must be >= 0, got {n}")
    n_keys = vocab // 2
    n_values = vocab - 1 - n_keys
    rng = np.random.default_rng(seed)
    dictionary = n_keys + rng.integers(n_values, size=(n, n_keys))
    keys = rng.integers(n_keys, size=(n, n_pairs))
    values = np.take_along_axis(dictionary, keys, axis=1)
    pick = rng.integers(n_pairs, size=n)
    rows = np.arange(n)
    query = keys[rows, pick]
    targets = dictionary[rows, query]
    # last pair holding the query key
    hits = keys == query[:, None]
    last_pair = n_pairs - 1 - np.argmax(hits[:, ::-1], axis=1)

    tokens = np.empty((n, L), dtype=np.int64)
    tokens[:, 0:2 * n_pairs:2] = keys
    tokens[:, 1:2 * n_pairs:2] = values
    if padded:
        tokens[:, L - 2] = pad_id
    tokens[:, L - 1] = query
    return tokens, targets.astype(np.int64), (2 * last_pair).astype(np.int64)


def gen_recall(vocab: int, L: int, n: int, seed: int) -> List[RecallSample]:
    tokens, targets, query_pos = gen_recall_arrays(vocab, L, n, seed)
    return [
        RecallSample(tokens=tuple(int(t) for t in row), target=int(target), query_pos=int(pos))
        for row, target, pos in zip(tokens, targets, query_pos)
    ]


class RecallDataset(Dataset):
    """Recall samples as tensors; items are ``(tokens, target)``."""

    def __init__(self, tokens: torch.Tensor, targets: torch.Tensor, query_pos: Optional[torch.Tensor] = None):
        if tokens.dim() != 2 or targets.shape != (tokens.shape[0],):
            raise ConfigError(
                f"Expected tokens (n, L) and targets (n,), got {tuple(tokens.shape)} and {tuple(targets.shape)}"
            )
        self.tokens = tokens.long()
        self.targets = targets.long()
        self.query_pos = (query_pos if query_pos is not None else torch.full_like(self.targets, -1)).long()

    @classmethod
    def generate(cls, vocab: int, L: int, n: int, seed: int) -> "RecallDataset":
        tokens, targets, query_pos = gen_recall_arrays(vocab, L, n, seed)
        return cls(torch.from_numpy(tokens), torch.from_numpy(targets), torch.from_numpy(query_pos))

    @classmethod
    def from_samples(cls, samples: Sequence[RecallSample]) -> "RecallDataset":
        return cls(
            torch.tensor([s.tokens for s in samples], dtype=torch.int64),
            torch.tensor([s.target for s in samples], dtype=torch.int64),
            torch.tensor([s.query_pos for s in samples], dtype=torch.int64),
        )

    def __len__(self) -> int:
        return self.tokens.shape[0]

    def __getitem__(self, idx):
        return self.tokens[idx], self.targets[idx]

    @property
    def seq_len(self) -> int:
        return self.tokens.shape[1]

    def sample_hashes(self) -> List[str]:
        return [hashlib.sha1(row.numpy().tobytes()).hexdigest() for row in self.tokens]

    def subset(self, indices: Union[Sequence[int], torch.Tensor]) -> "RecallDataset":
        idx = torch.as_tensor(indices, dtype=torch.int64)
        return RecallDataset(self.tokens[idx], self.targets[idx], self.query_pos[idx])

    def save(self, path: Union[str, Path]) -> None:
        """Write the dataset cache (``tokens``, ``targets``, ``query_pos``)."""
        save_named_tensors(path, {"tokens": self.tokens, "targets": self.targets, "query_pos": self.query_pos})
        logger.info(f"Wrote {len(self)} recall samples to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RecallDataset":
        tensors = load_named_tensors(path)
        missing = [name for name in ("tokens", "targets") if name not in tensors]
        if missing:
            raise ArtifactError(f"Dataset cache {path} lacks tensor '{missing[0]}'")
        try:
            return cls(tensors["tokens"], tensors["targets"], tensors.get("query_pos"))
        except ConfigError as e:
            raise ArtifactError(f"Dataset cache {path} is malformed: {e}") from e


def split_recall(dataset: RecallDataset, test_fraction: float = 0.1, seed: int = 0) -> Tuple[RecallDataset, RecallDataset]:
    """
    Shuffle and split into train/test with no sequence on both sides.

    Duplicate sequences are dropped before splitting, so the test set never contains a sequence
    seen in training.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    seen = set()
    keep = []
    for i, h in enumerate(dataset.sample_hashes()):
        if h not in seen:
            seen.add(h)
            keep.append(i)
    if len(keep) < len(dataset):
        logger.warning(f"Dropped {len(dataset) - len(keep)} duplicate recall samples")
    if len(keep) < 2:
        raise ConfigError("Need at least two distinct samples to split")
    order = np.random.default_rng(seed).permutation(keep)
    n_test = min(max(1, int(round(len(order) * test_fraction))), len(order) - 1)
    return dataset.subset(order[n_test:].tolist()), dataset.subset(order[:n_test].tolist())


__all__ = ["RecallSample", "recall_layout", "gen_recall_arrays", "gen_recall", "RecallDataset", "split_recall"]
