import math

import pytest
import torch

from focus_iir.errors import DimensionError
from focus_iir.train.metrics import accuracy, all_positions_loss, bpc, final_position_loss


def one_hot_logits(targets, L=4, V=30, scale=10.0):
    logits = torch.zeros(len(targets), L, V, dtype=torch.float64)
    logits[torch.arange(len(targets)), -1, targets] = scale
    return logits


def test_accuracy_examples():
    targets = torch.tensor([3, 17, 0, 29])
    assert accuracy(one_hot_logits(targets), targets) == 1.0
    wrong = targets.clone()
    wrong[0] = 4
    assert accuracy(one_hot_logits(wrong), targets) == 0.75
    # flat logits always pick id 0
    assert accuracy(torch.zeros(30, 4, 30, dtype=torch.float64), torch.arange(30)) == pytest.approx(1 / 30)


def test_accuracy_reads_final_position_only():
    targets = torch.tensor([5, 6])
    logits = one_hot_logits(targets)
    logits[:, 0, 0] = 100.0
    assert accuracy(logits, targets) == 1.0


def test_accuracy_shape_mismatch():
    with pytest.raises(DimensionError):
        accuracy(torch.zeros(2, 4, 30), torch.zeros(3, dtype=torch.int64))


def test_uniform_losses():
    logits = torch.zeros(5, 7, 30, dtype=torch.float64)
    assert float(final_position_loss(logits, torch.zeros(5, dtype=torch.int64))) == pytest.approx(math.log(30))
    assert float(all_positions_loss(logits, torch.zeros(5, 7, dtype=torch.int64))) == pytest.approx(math.log(30))
    with pytest.raises(DimensionError):
        all_positions_loss(logits, torch.zeros(5, 6, dtype=torch.int64))


def test_bpc_examples():
    targets = torch.randint(0, 256, (2, 9), generator=torch.Generator().manual_seed(0))
    perfect = torch.full((2, 9, 256), -1e4, dtype=torch.float64).scatter(-1, targets.unsqueeze(-1), 0.0)
    assert bpc(perfect, targets) == pytest.approx(0.0, abs=1e-12)
    assert bpc(torch.zeros(2, 9, 256, dtype=torch.float64), targets) == pytest.approx(8.0)
    two_way = torch.full((2, 9, 256), -1e4, dtype=torch.float64)
    two_way[..., :2] = 0.0
    assert bpc(two_way, targets % 2) == pytest.approx(1.0)
