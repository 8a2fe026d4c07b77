import logging

import pytest
import torch
from pydantic import ValidationError

from focus_iir.data.recall import RecallDataset, gen_recall, recall_layout, split_recall
from focus_iir.errors import ArtifactError, ConfigError
from focus_iir.tensor.checkpoint import save_named_tensors


def test_layout():
    assert recall_layout(30, 30) == (14, 29, True)
    assert recall_layout(30, 31) == (15, 29, False)
    with pytest.raises(ConfigError):
        recall_layout(3, 30)
    with pytest.raises(ConfigError):
        recall_layout(30, 2)


@pytest.mark.parametrize("L", [30, 31, 3])
def test_samples_answer_their_query(L):
    n_pairs, pad_id, padded = recall_layout(30, L)
    for s in gen_recall(vocab=30, L=L, n=200, seed=1):
        tokens = s.tokens
        assert len(tokens) == L
        keys, values = tokens[0:2 * n_pairs:2], tokens[1:2 * n_pairs:2]
        assert all(0 <= k < 15 for k in keys)
        assert all(15 <= v < pad_id for v in values)
        if padded:
            assert tokens[L - 2] == pad_id
        query = tokens[-1]
        last = max(i for i, k in enumerate(keys) if k == query)
        assert s.target == values[last]
        assert s.query_pos == 2 * last
        assert tokens[s.query_pos + 1] == s.target
        # one dictionary per sample: a repeated key always carries the same value
        pairs = {}
        for k, v in zip(keys, values):
            assert pairs.setdefault(k, v) == v


def test_generation_is_deterministic():
    a = RecallDataset.generate(30, 30, 50, seed=4)
    b = RecallDataset.generate(30, 30, 50, seed=4)
    c = RecallDataset.generate(30, 30, 50, seed=5)
    assert torch.equal(a.tokens, b.tokens) and torch.equal(a.targets, b.targets)
    assert not torch.equal(a.tokens, c.tokens)
    assert RecallDataset.from_samples(gen_recall(30, 30, 50, seed=4)).tokens.tolist() == a.tokens.tolist()


def test_split_is_disjoint():
    data = RecallDataset.generate(30, 30, 200, seed=0)
    train, test = split_recall(data, test_fraction=0.1, seed=0)
    assert len(test) == 20 and len(train) == 180
    assert not set(train.sample_hashes()) & set(test.sample_hashes())


def test_split_drops_duplicates(caplog):
    data = RecallDataset.generate(30, 12, 10, seed=0)
    doubled = data.subset(list(range(10)) + [0, 1, 2])
    with caplog.at_level(logging.WARNING):
        train, test = split_recall(doubled, test_fraction=0.2, seed=0)
    assert "duplicate" in caplog.text
    assert len(train) + len(test) == len(set(data.sample_hashes()))
    assert not set(train.sample_hashes()) & set(test.sample_hashes())


def test_split_rejects_bad_fraction():
    with pytest.raises(ConfigError):
        split_recall(RecallDataset.generate(30, 12, 10, seed=0), test_fraction=1.0)


def test_cache_round_trip(tmp_path):
    data = RecallDataset.generate(30, 30, 20, seed=2)
    data.save(tmp_path / "d.focus")
    back = RecallDataset.load(tmp_path / "d.focus")
    assert torch.equal(back.tokens, data.tokens)
    assert torch.equal(back.targets, data.targets)
    assert torch.equal(back.query_pos, data.query_pos)
    tokens, target = back[3]
    assert tokens.shape == (30,) and int(target) == int(data.targets[3])


def test_cache_missing_tensor(tmp_path):
    save_named_tensors(tmp_path / "d.focus", {"tokens": torch.zeros(2, 4, dtype=torch.int64)})
    with pytest.raises(ArtifactError, match="targets"):
        RecallDataset.load(tmp_path / "d.focus")


def test_samples_are_frozen_records():
    sample = gen_recall(30, 30, 1, seed=0)[0]
    assert set(sample.model_dump()) == {"tokens", "target", "query_pos"}
    assert sample.tokens[sample.query_pos] == sample.tokens[-1]
    with pytest.raises(ValidationError):
        sample.target = 0
