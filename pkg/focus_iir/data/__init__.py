from .recall import RecallSample, recall_layout, gen_recall, gen_recall_arrays, RecallDataset, split_recall
from .corpus import BYTE_VOCAB, CorpusDataset

__all__ = [
    "RecallSample",
    "recall_layout",
    "gen_recall",
    "gen_recall_arrays",
    "RecallDataset",
    "split_recall",
    "BYTE_VOCAB",
    "CorpusDataset",
]
