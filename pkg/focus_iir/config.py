"""
Configuration models and the key=value config-file loader.

Precedence when resolving an experiment: CLI flag > config file > FOCUS_SEED (seed only) > default.
"""
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Literal, Mapping, Optional, Tuple, Type, TypeVar, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .errors import ConfigError
from .tensor.ops import is_power_of_two

logger = logging.getLogger(__name__)

SEED_ENV = "FOCUS_SEED"

M = TypeVar("M", bound=BaseModel)


def next_pow2(n: int) -> int:
    return 1 << max(0, math.ceil(math.log2(max(1, n))))


def validated(model_cls: Type[M], data: Mapping[str, Any]) -> M:
    """Build a config model, turning pydantic errors into a ConfigError naming the key."""
    try:
        return model_cls.model_validate(dict(data))
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first.get("loc", ())) or "<config>"
        raise ConfigError(f"Invalid config key '{key}': {first.get('msg')}") from e


class FocusConfig(BaseModel):
    """Model hyperparameters. Defaults follow the associative-recall settings."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    L: int
    width: int = 64
    d_att: Optional[int] = None
    nfft: Optional[int] = None
    filters: int = 1
    chunk: Optional[int] = None
    oversampling: int = 4
    hidden: Optional[int] = None
    n_layers: int = 2
    vocab: int = 30
    ablation: bool = False
    share_hyper_embedding: bool = True
    squash_lambda: float = 1e-3
    l_max: Optional[int] = None

    @model_validator(mode="before")
    @classmethod
    def _derive_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "L" not in data:
            return data
        data = dict(data)
        L = int(data["L"])
        width = int(data.get("width") or 64)
        oversampling = int(data.get("oversampling") or 4)
        if data.get("d_att") is None:
            data["d_att"] = width
        if data.get("nfft") is None:
            data["nfft"] = next_pow2(math.ceil(L / 4))
        if data.get("chunk") is None:
            data["chunk"] = min(L, 32)
        if data.get("hidden") is None:
            data["hidden"] = 2 * oversampling
        if data.get("l_max") is None:
            data["l_max"] = L
        return data

    @model_validator(mode="after")
    def _check(self) -> "FocusConfig":
        for name in ("L", "width", "d_att", "nfft", "filters", "chunk", "oversampling", "hidden", "vocab"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")
        if not is_power_of_two(self.nfft):
            raise ValueError(f"nfft must be a power of two, got {self.nfft}")
        if self.chunk > self.L:
            raise ValueError(f"chunk ({self.chunk}) must not exceed L ({self.L})")
        if self.L > self.l_max:
            raise ValueError(f"L ({self.L}) exceeds l_max ({self.l_max})")
        if self.L < self.oversampling * self.nbins:
            raise ValueError(f"L ({self.L}) must be >= oversampling*nbins ({self.oversampling * self.nbins})")
        if self.squash_lambda < 0:
            raise ValueError("squash_lambda must be >= 0")
        return self

    @property
    def nbins(self) -> int:
        return math.ceil(self.L / self.nfft)

    @property
    def n_chunks(self) -> int:
        return math.ceil(self.L / self.chunk)


class TrainConfig(BaseModel):
    """Optimization settings (AdamW with linear warmup)."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    task: Literal["recall", "charlm"] = "recall"
    lr: float = 1e-4
    betas: Tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-8
    batch: int = 32
    n_samples: int = 2000
    test_fraction: float = 0.1
    warmup_epochs: int = 10
    weight_decay: float = 0.01
    epochs: int = 200
    target_accuracy: float = 1.0
    seed: int = 0
    corpus: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if self.lr <= 0 or self.batch < 1 or self.epochs < 1 or self.n_samples < 2:
            raise ValueError("lr, batch, epochs and n_samples must be positive (n_samples >= 2)")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.warmup_epochs < 0 or self.weight_decay < 0:
            raise ValueError("warmup_epochs and weight_decay must be >= 0")
        if self.task == "charlm" and not self.corpus:
            raise ValueError("task 'charlm' needs a corpus path")
        return self


class ExperimentConfig(BaseModel):
    """Every user-facing key, as accepted by config files and --set overrides."""
    model_config = ConfigDict(extra="forbid")

    task: Literal["recall", "charlm"] = "recall"
    L: int = 30
    vocab: Optional[int] = None
    width: int = 64
    d_att: Optional[int] = None
    nfft: Optional[int] = None
    filters: int = 1
    chunk: Optional[int] = None
    oversampling: int = 4
    hidden: Optional[int] = None
    n_layers: int = 2
    ablation: bool = False
    share_hyper_embedding: bool = True
    squash_lambda: float = 1e-3
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    batch: int = 32
    n_samples: int = 2000
    test_fraction: float = 0.1
    warmup_epochs: int = 10
    weight_decay: float = 0.01
    epochs: int = 200
    target_accuracy: float = 1.0
    seed: int = 0
    corpus: Optional[str] = None

    def focus_config(self) -> FocusConfig:
        vocab = self.vocab if self.vocab is not None else (256 if self.task == "charlm" else 30)
        return validated(FocusConfig, dict(
            L=self.L, width=self.width, d_att=self.d_att, nfft=self.nfft, filters=self.filters,
            chunk=self.chunk, oversampling=self.oversampling, hidden=self.hidden,
            n_layers=self.n_layers, vocab=vocab, ablation=self.ablation,
            share_hyper_embedding=self.share_hyper_embedding, squash_lambda=self.squash_lambda,
        ))

    def train_config(self) -> TrainConfig:
        return validated(TrainConfig, dict(
            task=self.task, lr=self.lr, betas=(self.beta1, self.beta2), eps=self.eps,
            batch=self.batch, n_samples=self.n_samples, test_fraction=self.test_fraction,
            warmup_epochs=self.warmup_epochs, weight_decay=self.weight_decay, epochs=self.epochs,
            target_accuracy=self.target_accuracy, seed=self.seed, corpus=self.corpus,
        ))


class RunConfig(BaseModel):
    """What a single CLI invocation resolved to."""
    model_config = ConfigDict(extra="forbid")

    command: Literal["train", "eval", "inspect-filters", "bench", "gen-data"]
    config_path: Optional[Path] = None
    overrides: Dict[str, str] = {}
    output_dir: Path = Path("runs")
    seed: int = 0


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Parse a plain-text key=value file (``#`` comments allowed)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    values = dotenv_values(path)
    empty = [k for k, v in values.items() if v is None]
    if empty:
        raise ConfigError(f"Config key '{empty[0]}' in {path} has no value")
    return {k: v for k, v in values.items()}


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override '{pair}' is not of the form key=value")
        out[key.strip()] = value.strip()
    return out


def resolve_experiment(
    file_values: Optional[Mapping[str, Any]] = None,
    flag_values: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """Merge default < FOCUS_SEED < config file < CLI flags and validate."""
    merged: Dict[str, Any] = {}
    env_seed = os.getenv(SEED_ENV)
    if env_seed:
        merged["seed"] = env_seed
    merged.update(file_values or {})
    merged.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    unknown = sorted(set(merged) - set(ExperimentConfig.model_fields))
    if unknown:
        raise ConfigError(f"Unknown config key '{unknown[0]}'")
    return validated(ExperimentConfig, merged)


__all__ = [
    "SEED_ENV",
    "next_pow2",
    "validated",
    "FocusConfig",
    "TrainConfig",
    "ExperimentConfig",
    "RunConfig",
    "load_config_file",
    "parse_overrides",
    "resolve_experiment",
]
