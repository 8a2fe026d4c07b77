import pytest
import torch

from focus_iir.data.corpus import CorpusDataset
from focus_iir.errors import ConfigError, InputError


def test_windows_are_shifted_by_one(tmp_path):
    path = tmp_path / "c.txt"
    path.write_bytes(b"abcdefghij")
    data = CorpusDataset.from_file(path, L=3)
    assert len(data) == 3
    inputs, targets = data[1]
    assert bytes(inputs.tolist()) == b"def"
    assert bytes(targets.tolist()) == b"efg"
    assert bytes(data[-1][1].tolist()) == b"hij"
    with pytest.raises(IndexError):
        data[3]


def test_split_keeps_the_tail_for_testing():
    data = CorpusDataset(torch.arange(41) % 256, L=4)
    train, test = data.split(0.2)
    assert (len(train), len(test)) == (8, 2)
    assert train[7][1][-1] == test[0][0][0]
    assert int(test[-1][1][-1]) == 40


def test_corpus_errors(tmp_path):
    with pytest.raises(ConfigError):
        CorpusDataset.from_file(tmp_path / "missing.txt", L=4)
    with pytest.raises(InputError):
        CorpusDataset(torch.zeros(4, dtype=torch.uint8), L=4)
    with pytest.raises(InputError):
        CorpusDataset(torch.zeros(6, dtype=torch.uint8), L=4).split(0.5)
