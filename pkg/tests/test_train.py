import math

import numpy as np
import pandas as pd
import pytest
import torch
import torch.nn as nn

from focus_iir.analysis.filters import inspect_filters
from focus_iir.config import ExperimentConfig, FocusConfig, TrainConfig
from focus_iir.data.corpus import CorpusDataset
from focus_iir.data.recall import RecallDataset, split_recall
from focus_iir.errors import DivergenceError
from focus_iir.model.focus import FocusModel
from focus_iir.train.loop import (
    LOG_COLUMNS,
    EpochRecord,
    TrainingLog,
    build_optimizer,
    evaluate,
    fast_forward,
    seed_everything,
    train,
    warmup_factor,
)


class Scalar(nn.Module):
    def __init__(self, value: float):
        super(Scalar, self).__init__()
        self.w = nn.Parameter(torch.tensor(value, dtype=torch.float64))


class NanModel(nn.Module):
    def __init__(self, vocab: int):
        super(NanModel, self).__init__()
        self.vocab = vocab
        self.w = nn.Parameter(torch.tensor(float("nan"), dtype=torch.float64))

    def forward(self, tokens):
        return self.w * torch.ones(*tokens.shape, self.vocab, dtype=torch.float64)


def tiny_recall(n=40, L=16, seed=0):
    return split_recall(RecallDataset.generate(30, L, n, seed), test_fraction=0.1, seed=seed)


def tiny_model(L=16, seed=0):
    return FocusModel(FocusConfig(L=L, width=8, nfft=4, chunk=4, n_layers=1), seed=seed)


def recall_run(experiment: ExperimentConfig):
    fc, tc = experiment.focus_config(), experiment.train_config()
    seed_everything(tc.seed)
    train_data, test_data = split_recall(RecallDataset.generate(fc.vocab, fc.L, tc.n_samples, tc.seed),
                                         tc.test_fraction, tc.seed)
    model = FocusModel(fc, seed=tc.seed)
    return model, test_data, train(model, train_data, test_data, tc)


@pytest.mark.parametrize("step,expected", [(0, 0.0), (25, 0.25), (50, 0.5), (100, 1.0), (400, 1.0)])
def test_warmup_factor(step, expected):
    assert warmup_factor(step, steps_per_epoch=10, warmup_epochs=10) == pytest.approx(expected)


def test_no_warmup_is_flat():
    assert warmup_factor(0, 10, 0) == 1.0


def test_fast_forward_mid_warmup():
    _, scheduler = build_optimizer(Scalar(1.0), TrainConfig(lr=1e-3, warmup_epochs=10), steps_per_epoch=4)
    fast_forward(scheduler, 20)  # epoch 5 of 10
    assert scheduler.optimizer.param_groups[0]["lr"] == pytest.approx(5e-4)
    assert scheduler.last_epoch == 20


def test_first_adamw_step_moves_by_lr():
    model = Scalar(1.0)
    optimizer, _ = build_optimizer(model, TrainConfig(lr=1e-4, warmup_epochs=0, weight_decay=0.0), 1)
    (3.0 * model.w).backward()
    optimizer.step()
    assert float(model.w) - 1.0 == pytest.approx(-1e-4, rel=1e-6)


def test_adamw_with_warmup_matches_reference():
    lr, b1, b2, eps, wd = 1e-2, 0.9, 0.98, 1e-8, 0.01
    tc = TrainConfig(lr=lr, betas=(b1, b2), eps=eps, weight_decay=wd, warmup_epochs=5)
    model = Scalar(0.5)
    optimizer, scheduler = build_optimizer(model, tc, steps_per_epoch=1)
    w, m, v = 0.5, 0.0, 0.0
    for k in range(10):
        optimizer.zero_grad()
        ((model.w - 2.0) ** 2).backward()
        optimizer.step()
        scheduler.step()

        g = 2.0 * (w - 2.0)
        lr_k = lr * min(1.0, k / 5)
        t = k + 1
        w *= 1.0 - lr_k * wd
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        denom = math.sqrt(v) / math.sqrt(1.0 - b2 ** t) + eps
        w -= lr_k / (1.0 - b1 ** t) * m / denom
        assert abs(float(model.w) - w) < 1e-12, k


def test_smoke_run_logs_every_epoch():
    seed_everything(0)
    train_data, test_data = tiny_recall()
    tc = TrainConfig(batch=8, epochs=2, warmup_epochs=1, lr=1e-3)
    result = train(tiny_model(), train_data, test_data, tc)
    frame = result.log.to_frame()
    assert list(frame.columns) == LOG_COLUMNS
    assert frame["epoch"].tolist() == [1, 2]
    steps_per_epoch = math.ceil(len(train_data) / 8)
    assert frame["step"].tolist() == [steps_per_epoch, 2 * steps_per_epoch]
    assert set(result.metrics) == {"accuracy", "loss"}
    assert all(math.isfinite(x) for x in result.log.losses)
    assert not result.stopped_early


def test_training_reduces_loss():
    train_data, test_data = tiny_recall(n=64)
    model = tiny_model()
    before = evaluate(model, train_data, "recall")["loss"]
    train(model, train_data, test_data, TrainConfig(batch=8, epochs=5, warmup_epochs=0, lr=3e-3))
    assert evaluate(model, train_data, "recall")["loss"] < before


def test_non_finite_loss_raises_divergence():
    train_data, test_data = tiny_recall()
    with pytest.raises(DivergenceError) as info:
        train(NanModel(30), train_data, test_data, TrainConfig(batch=8, epochs=1))
    assert info.value.exit_code == 4
    assert info.value.step == 0


def test_early_stop_on_target_accuracy():
    train_data, test_data = tiny_recall()
    result = train(tiny_model(), train_data, test_data, TrainConfig(batch=8, epochs=3, target_accuracy=0.0))
    assert result.epoch == 1
    assert result.stopped_early
    assert len(result.log.records) == 1


def test_resumed_run_continues_counters():
    train_data, test_data = tiny_recall()
    model = tiny_model()
    first = train(model, train_data, test_data, TrainConfig(batch=8, epochs=1, warmup_epochs=1))
    tc = TrainConfig(batch=8, epochs=3, warmup_epochs=1)
    result = train(model, train_data, test_data, tc, first.optimizer, first.scheduler,
                   start_epoch=first.epoch, start_step=first.step)
    assert [r.epoch for r in result.log.records] == [2, 3]
    assert result.step == 3 * first.step


def test_charlm_smoke(tmp_path):
    gen = torch.Generator().manual_seed(0)
    data = CorpusDataset(torch.randint(0, 256, (16 * 30 + 1,), generator=gen), L=16)
    train_data, test_data = data.split(0.2)
    model = FocusModel(FocusConfig(L=16, width=8, nfft=4, chunk=4, n_layers=1, vocab=256))
    tc = TrainConfig(task="charlm", corpus=str(tmp_path / "unused.txt"), batch=4, epochs=1)
    result = train(model, train_data, test_data, tc)
    assert set(result.metrics) == {"bpc", "loss"}
    assert result.metrics["bpc"] == pytest.approx(result.metrics["loss"] / math.log(2))
    assert result.log.records[0].train_metric > 0


@pytest.mark.slow
@pytest.mark.parametrize("ablation", [False, True])
def test_recall_l30_reaches_full_accuracy(ablation):
    model, test_data, result = recall_run(ExperimentConfig(L=30, ablation=ablation))
    assert result.metrics["accuracy"] >= 0.99
    if not ablation:
        report = inspect_filters(model, test_data.tokens[0], layer=0,
                                 query_pos=int(test_data.query_pos[0]))
        assert report.focus_ratio() >= 10.0


@pytest.mark.slow
def test_charlm_tiny_corpus_bpc(tmp_path):
    text = ("the quick brown fox jumps over the lazy dog. " * 400).encode("utf-8")
    corpus = tmp_path / "corpus.txt"
    corpus.write_bytes(text)
    experiment = ExperimentConfig(task="charlm", L=64, width=32, corpus=str(corpus), epochs=20,
                                  warmup_epochs=1, lr=1e-3)
    fc, tc = experiment.focus_config(), experiment.train_config()
    train_data, test_data = CorpusDataset.from_file(corpus, fc.L).split(tc.test_fraction)
    result = train(FocusModel(fc, seed=0), train_data, test_data, tc)
    assert result.metrics["bpc"] < 4.5


def test_training_log_frame(tmp_path):
    log = TrainingLog()
    log.append(EpochRecord(epoch=1, step=5, lr=1e-4, loss=3.2, metric=0.1, train_metric=0.05))
    log.append(EpochRecord(epoch=2, step=10, lr=1e-4, loss=3.0, metric=0.2, train_metric=0.1))
    assert log.losses == [3.2, 3.0]
    assert log.model_dump()["records"][1]["step"] == 10
    frame = pd.read_csv(log.to_csv(tmp_path / "log.csv"))
    assert list(frame.columns) == LOG_COLUMNS
    assert frame["epoch"].tolist() == [1, 2]


@pytest.mark.slow
def test_default_loss_decreases_over_twenty_epochs():
    losses = np.array([
        [r.loss for r in recall_run(ExperimentConfig(L=30, epochs=20, seed=seed))[2].log.records]
        for seed in range(3)
    ])
    assert losses.shape == (3, 20)
    median = np.median(losses, axis=0)
    assert np.all(np.diff(median) < 0)


@pytest.mark.slow
def test_recall_l1024(record_property):
    _, _, focus = recall_run(ExperimentConfig(L=1024))
    _, _, static = recall_run(ExperimentConfig(L=1024, ablation=True))
    record_property("focus_accuracy", focus.metrics["accuracy"])
    record_property("ablation_accuracy", static.metrics["accuracy"])
    assert focus.metrics["accuracy"] >= 0.95
