"""
The Focus language model: token embedding, pre-norm Focus blocks and a linear vocabulary head,
plus checkpoint save/load under the documented parameter names.
"""
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import torch
import torch.nn as nn

from ..config import FocusConfig, validated
from ..errors import ArtifactError, InputError
from ..tensor.checkpoint import Checkpoint
from ..tensor.ops import REAL
from .hypernet import GlobalConv, make_embedding
from .layer import FocusLayer

logger = logging.getLogger(__name__)

HEAD_STD = 0.01
_BLOCK_NAME = re.compile(r"^blocks\.(\d+)\.(?:layer\.)?")
_OPTIM_SLOTS = ("exp_avg", "exp_avg_sq", "step")


class FocusBlock(nn.Module):
    """LayerNorm on the computation path; the update gate skips to the raw input."""

    def __init__(self, config: FocusConfig):
        super(FocusBlock, self).__init__()
        self.norm = nn.LayerNorm(config.width, dtype=REAL)
        self.layer = FocusLayer(config, own_embedding=not config.share_hyper_embedding)

    def forward(self, x: torch.Tensor, embedding: Optional[torch.Tensor] = None) -> torch.Tensor:
        return self.layer(self.norm(x), embedding=embedding, residual=x)


class FocusModel(nn.Module):
    """
    Tokens ``(..., L)`` -> logits ``(..., L, vocab)``.

    When ``share_hyper_embedding`` is set (and the ablation is off) one global convolution
    ``hyper.gconv`` embeds the token embeddings once per forward pass and every layer runs its
    own coefficient MLP on that embedding.
    """

    def __init__(self, config: FocusConfig, seed: Optional[int] = 0):
        super(FocusModel, self).__init__()
        self.config = config
        self.embed = nn.Embedding(config.vocab, config.width, dtype=REAL)
        self.hyper = None
        if config.share_hyper_embedding and not config.ablation and config.n_layers > 0:
            self.hyper = nn.ModuleDict({"gconv": GlobalConv(config.l_max, config.width, config.squash_lambda)})
        self.blocks = nn.ModuleList([FocusBlock(config) for _ in range(config.n_layers)])
        self.norm = nn.LayerNorm(config.width, dtype=REAL)
        self.head = nn.Linear(config.width, config.vocab, dtype=REAL)
        if seed is not None:
            self.reset_parameters(seed)

    def reset_parameters(self, seed: int) -> None:
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.embed.weight.normal_(0.0, 1.0, generator=generator)
            self.head.weight.normal_(0.0, HEAD_STD, generator=generator)
            self.head.bias.zero_()
        if self.hyper is not None:
            self.hyper["gconv"].reset_parameters(generator)
        for block in self.blocks:
            block.norm.reset_parameters()
            block.layer.reset_parameters(generator)
        self.norm.reset_parameters()

    def check_tokens(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.dtype.is_floating_point or tokens.is_complex():
            raise InputError(f"Token ids must be integers, got {tokens.dtype}")
        if tokens.numel() and (int(tokens.min()) < 0 or int(tokens.max()) >= self.config.vocab):
            raise InputError(
                f"Token ids must lie in [0, {self.config.vocab}), got range "
                f"[{int(tokens.min())}, {int(tokens.max())}]"
            )
        return tokens.long()

    def shared_embedding(self, x: torch.Tensor) -> Optional[torch.Tensor]:
        if self.hyper is None:
            return None
        nbins = -(-x.shape[-2] // self.config.nfft)
        return make_embedding(x, self.hyper["gconv"], self.config.oversampling, nbins, nfft=self.config.nfft)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        x = self.embed(self.check_tokens(tokens))
        if not self.blocks:
            return self.head(x)
        e = self.shared_embedding(x)
        for block in self.blocks:
            x = block(x, embedding=e)
        return self.head(self.norm(x))

    @torch.no_grad()
    def coefficients(self, tokens: torch.Tensor) -> List[Dict[str, torch.Tensor]]:
        """Per layer: the ``generated`` coefficients of each bin and the shifted ``applied`` ones."""
        x = self.embed(self.check_tokens(tokens))
        e = self.shared_embedding(x)
        out = []
        for block in self.blocks:
            generated, applied = block.layer.coefficients(block.norm(x), e)
            out.append({"generated": generated, "applied": applied})
            x = block(x, embedding=e)
        return out

    def checkpoint_names(self) -> Dict[str, str]:
        """torch parameter name -> checkpoint name (``blocks.0.layer.q`` -> ``layer0.q``)."""
        return {name: _BLOCK_NAME.sub(r"layer\1.", name) for name, _ in self.named_parameters()}

    def checkpoint_params(self) -> Dict[str, torch.Tensor]:
        names = self.checkpoint_names()
        return {names[name]: p.detach().clone() for name, p in self.named_parameters()}

    def load_params(self, params: Mapping[str, torch.Tensor]) -> None:
        """Copy checkpoint tensors into this model; names and shapes must match exactly."""
        names = self.checkpoint_names()
        expected = set(names.values())
        unexpected = sorted(set(params) - expected)
        if unexpected:
            raise ArtifactError(f"Checkpoint tensor '{unexpected[0]}' has no counterpart in the model")
        with torch.no_grad():
            for name, p in self.named_parameters():
                key = names[name]
                if key not in params:
                    raise ArtifactError(f"Checkpoint is missing tensor '{key}'")
                value = params[key]
                if tuple(value.shape) != tuple(p.shape):
                    raise ArtifactError(
                        f"Tensor '{key}' has shape {tuple(value.shape)} in the checkpoint, "
                        f"model expects {tuple(p.shape)}"
                    )
                p.copy_(value.to(p.dtype))

    def optimizer_tensors(self, optimizer: torch.optim.Optimizer) -> Dict[str, torch.Tensor]:
        names = self.checkpoint_names()
        out: Dict[str, torch.Tensor] = {}
        for name, p in self.named_parameters():
            state = optimizer.state.get(p)
            if not state:
                continue
            for slot in _OPTIM_SLOTS:
                value = state[slot]
                value = value if torch.is_tensor(value) else torch.tensor(value)
                out[f"{names[name]}.{slot}"] = value.detach().to(REAL).reshape(p.shape if slot != "step" else ())
        return out

    def restore_optimizer(self, optimizer: torch.optim.Optimizer, tensors: Mapping[str, torch.Tensor]) -> None:
        """Reload AdamW moments and step counts saved by ``optimizer_tensors``."""
        names = self.checkpoint_names()
        for name, p in self.named_parameters():
            key = names[name]
            if f"{key}.step" not in tensors:
                continue
            try:
                optimizer.state[p] = {
                    "step": tensors[f"{key}.step"].to(torch.float32).reshape(()),
                    "exp_avg": tensors[f"{key}.exp_avg"].to(p.dtype).reshape(p.shape),
                    "exp_avg_sq": tensors[f"{key}.exp_avg_sq"].to(p.dtype).reshape(p.shape),
                }
            except (KeyError, RuntimeError) as e:
                raise ArtifactError(f"Optimizer state for '{key}' is incomplete or mis-shaped") from e

    def save_checkpoint(
        self,
        path: Union[str, Path],
        optimizer: Optional[torch.optim.Optimizer] = None,
        meta: Optional[Dict[str, Any]] = None,
    ) -> Checkpoint:
        meta = dict(meta or {})
        meta["model"] = self.config.model_dump()
        ckpt = Checkpoint(
            params=self.checkpoint_params(),
            optimizer=self.optimizer_tensors(optimizer) if optimizer is not None else {},
            meta=meta,
        )
        ckpt.save(path)
        logger.info(f"Saved checkpoint to {path}")
        return ckpt

    @classmethod
    def load_checkpoint(
        cls,
        path: Union[str, Path],
        config: Optional[FocusConfig] = None,
    ) -> Tuple["FocusModel", Checkpoint]:
        """
        Rebuild a model from a checkpoint.

        Args:
            path: FOCUS1 checkpoint file.
            config: build the model from this config instead of the stored one; the stored
                tensors must then fit it.
        """
        ckpt = Checkpoint.load(path)
        if config is None:
            if "model" not in ckpt.meta:
                raise ArtifactError(f"{path} carries no model config")
            try:
                config = validated(FocusConfig, ckpt.meta["model"])
            except ValueError as e:
                raise ArtifactError(f"{path} holds an invalid model config: {e}") from e
        model = cls(config, seed=None)
        model.load_params(ckpt.params)
        return model, ckpt


def model_forward(tokens: torch.Tensor, model: FocusModel) -> torch.Tensor:
    return model(tokens)


__all__ = ["FocusBlock", "FocusModel", "model_forward"]
