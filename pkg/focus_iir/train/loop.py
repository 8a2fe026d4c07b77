"""
Optimization loop: AdamW with decoupled weight decay and a linear per-step warmup.
"""
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, Field
from torch.optim import AdamW
from torch.optim.lr_scheduler import LambdaLR
from torch.utils.data import DataLoader, Dataset

from ..config import TrainConfig
from ..errors import DivergenceError
from .metrics import LN2, accuracy, all_positions_loss, final_position_loss

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "step", "lr", "loss", "metric", "train_metric"]


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)


def warmup_factor(step: int, steps_per_epoch: int, warmup_epochs: int) -> float:
    """Linear ramp from 0 to 1 over ``warmup_epochs`` epochs, then 1."""
    total = steps_per_epoch * warmup_epochs
    if total <= 0:
        return 1.0
    return min(1.0, step / total)


def build_optimizer(
    model: torch.nn.Module,
    tc: TrainConfig,
    steps_per_epoch: int,
) -> Tuple[AdamW, LambdaLR]:
    optimizer = AdamW(
        model.parameters(),
        lr=tc.lr,
        betas=tuple(tc.betas),
        eps=tc.eps,
        weight_decay=tc.weight_decay,
    )
    scheduler = LambdaLR(optimizer, lambda step: warmup_factor(step, steps_per_epoch, tc.warmup_epochs))
    return optimizer, scheduler


def fast_forward(scheduler: LambdaLR, step: int) -> None:
    """Put a fresh scheduler at ``step`` (used when resuming)."""
    scheduler.last_epoch = step
    for group, base_lr, fn in zip(scheduler.optimizer.param_groups, scheduler.base_lrs, scheduler.lr_lambdas):
        group["lr"] = base_lr * fn(step)


class EpochRecord(BaseModel):
    epoch: int
    step: int
    lr: float
    loss: float
    metric: float  # eval accuracy (recall) or eval BPC (charlm)
    train_metric: float


class TrainingLog(BaseModel):
    records: List[EpochRecord] = Field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.records], columns=LOG_COLUMNS)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]


@dataclass
class TrainResult:
    log: TrainingLog
    metrics: Dict[str, float]
    optimizer: AdamW
    scheduler: LambdaLR
    epoch: int
    step: int
    stopped_early: bool = False


def task_loss(task: str, logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    if task == "recall":
        return final_position_loss(logits, targets)
    return all_positions_loss(logits, targets)


@torch.no_grad()
def evaluate(model: torch.nn.Module, dataset: Dataset, task: str, batch: int = 32) -> Dict[str, float]:
    """
    Held-out metrics in a fixed order.

    Returns:
        ``{"accuracy", "loss"}`` for recall (loss in nats), ``{"bpc", "loss"}`` for the char-LM.
    """
    was_training = model.training
    model.eval()
    total_loss, hits, count = 0.0, 0.0, 0
    for tokens, targets in DataLoader(dataset, batch_size=batch, shuffle=False):
        logits = model(tokens)
        n = tokens.shape[0]
        total_loss += float(task_loss(task, logits, targets)) * n
        if task == "recall":
            hits += accuracy(logits, targets) * n
        count += n
    model.train(was_training)
    mean_loss = total_loss / max(count, 1)
    if task == "recall":
        return {"accuracy": hits / max(count, 1), "loss": mean_loss}
    return {"bpc": mean_loss / LN2, "loss": mean_loss}


def headline(metrics: Dict[str, float]) -> float:
    return metrics["accuracy"] if "accuracy" in metrics else metrics["bpc"]


def train(
    model: torch.nn.Module,
    train_data: Dataset,
    test_data: Dataset,
    tc: TrainConfig,
    optimizer: Optional[AdamW] = None,
    scheduler: Optional[LambdaLR] = None,
    start_epoch: int = 0,
    start_step: int = 0,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """
    Train until the train accuracy reaches ``tc.target_accuracy`` (recall) or ``tc.epochs`` run out.

    Args:
        model: maps token batches to logits.
        train_data, test_data: datasets yielding ``(tokens, targets)``.
        tc: optimization settings.
        optimizer, scheduler: pass both to continue a resumed run.
        start_epoch, start_step: where a resumed run left off.
        on_epoch: called with every epoch record (e.g. to checkpoint).

    Raises:
        DivergenceError: the loss became non-finite.
    """
    loader = DataLoader(
        train_data,
        batch_size=tc.batch,
        shuffle=True,
        generator=torch.Generator().manual_seed(tc.seed + start_epoch),
    )
    steps_per_epoch = max(1, len(loader))
    if optimizer is None or scheduler is None:
        optimizer, scheduler = build_optimizer(model, tc, steps_per_epoch)
    log = TrainingLog()
    step = start_step
    epoch = start_epoch
    stopped_early = False
    metrics: Dict[str, float] = {}
    model.train()
    while epoch < tc.epochs:
        loss_sum, hits, seen = 0.0, 0.0, 0
        for tokens, targets in loader:
            logits = model(tokens)
            loss = task_loss(tc.task, logits, targets)
            if not torch.isfinite(loss):
                raise DivergenceError(step, float(loss))
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            scheduler.step()
            step += 1
            n = tokens.shape[0]
            loss_sum += float(loss) * n
            seen += n
            if tc.task == "recall":
                hits += accuracy(logits.detach(), targets) * n
            logger.debug(f"step {step}: loss={float(loss):.6f}")
        epoch += 1
        metrics = evaluate(model, test_data, tc.task, tc.batch)
        train_loss = loss_sum / max(seen, 1)
        train_metric = hits / max(seen, 1) if tc.task == "recall" else train_loss / LN2
        record = EpochRecord(
            epoch=epoch,
            step=step,
            lr=optimizer.param_groups[0]["lr"],
            loss=train_loss,
            metric=headline(metrics),
            train_metric=train_metric,
        )
        log.append(record)
        logger.info(
            f"epoch {epoch}: lr={record.lr:.3e} loss={record.loss:.4f} "
            f"train={record.train_metric:.4f} eval={record.metric:.4f}"
        )
        if on_epoch is not None:
            on_epoch(record)
        if tc.task == "recall" and train_metric >= tc.target_accuracy:
            stopped_early = epoch < tc.epochs
            logger.info(f"Reached train accuracy {train_metric:.4f} at epoch {epoch}")
            break
    return TrainResult(
        log=log,
        metrics=metrics,
        optimizer=optimizer,
        scheduler=scheduler,
        epoch=epoch,
        step=step,
        stopped_early=stopped_early,
    )


__all__ = [
    "LOG_COLUMNS",
    "seed_everything",
    "warmup_factor",
    "build_optimizer",
    "fast_forward",
    "EpochRecord",
    "TrainingLog",
    "TrainResult",
    "task_loss",
    "evaluate",
    "headline",
    "train",
]
