"""
Named-tensor flat binary container and the Checkpoint bundle stored in it.

File layout (all integers little-endian):

    b"FOCUS1"                    magic
    u64 count
    count x {
        u64 name_length, name (UTF-8)
        u8  dtype tag            (0 real64, 1 complex128, 2 int64, 3 uint8)
        u64 rank, rank x u64 extents
        raw little-endian values, row-major
    }
"""
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import numpy as np
import torch

from ..errors import ArtifactError

logger = logging.getLogger(__name__)

MAGIC = b"FOCUS1"

_TAGS = {
    torch.float64: (0, np.dtype("<f8")),
    torch.complex128: (1, np.dtype("<c16")),
    torch.int64: (2, np.dtype("<i8")),
    torch.uint8: (3, np.dtype("u1")),
}
_BY_TAG = {tag: (torch_dtype, np_dtype) for torch_dtype, (tag, np_dtype) in _TAGS.items()}

OPTIM_PREFIX = "optim."
META_CONFIG = "meta.config"


def save_named_tensors(path: Union[str, Path], tensors: Mapping[str, torch.Tensor]) -> None:
    """Write tensors to ``path`` in the FOCUS1 container format (insertion order kept)."""
    path = Path(path)
    chunks = [MAGIC, struct.pack("<Q", len(tensors))]
    for name, value in tensors.items():
        value = value.detach().cpu().contiguous()
        if value.dtype not in _TAGS:
            raise ArtifactError(f"Tensor '{name}' has unsupported dtype {value.dtype}")
        tag, np_dtype = _TAGS[value.dtype]
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<Q", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BQ", tag, value.dim()))
        chunks.append(struct.pack(f"<{value.dim()}Q", *value.shape))
        chunks.append(value.numpy().astype(np_dtype, copy=False).tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(b"".join(chunks))
    logger.debug(f"Wrote {len(tensors)} tensors to {path}")


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ArtifactError(f"{self.path} is truncated at byte {self.pos}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_named_tensors(path: Union[str, Path]) -> Dict[str, torch.Tensor]:
    """Read a FOCUS1 container back into an ordered name -> tensor dict."""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"No checkpoint found at {path}")
    reader = _Reader(path.read_bytes(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ArtifactError(f"{path} is not a FOCUS1 file (bad magic)")
    (count,) = reader.unpack("<Q")
    tensors: Dict[str, torch.Tensor] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<Q")
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ArtifactError(f"{path} holds a tensor name that is not UTF-8") from e
        tag, rank = reader.unpack("<BQ")
        if tag not in _BY_TAG:
            raise ArtifactError(f"Tensor '{name}' in {path} has unknown dtype tag {tag}")
        torch_dtype, np_dtype = _BY_TAG[tag]
        shape = reader.unpack(f"<{rank}Q")
        n_bytes = int(np.prod(shape, dtype=np.int64)) * np_dtype.itemsize
        values = np.frombuffer(reader.take(n_bytes), dtype=np_dtype).reshape(shape)
        tensors[name] = torch.from_numpy(values.copy()).to(torch_dtype)
    return tensors


@dataclass
class Checkpoint:
    """Learned parameters, optimizer state and the config that built them."""
    params: Dict[str, torch.Tensor]
    optimizer: Dict[str, torch.Tensor] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_named_tensors(self) -> Dict[str, torch.Tensor]:
        named = dict(self.params)
        named.update({OPTIM_PREFIX + k: v for k, v in self.optimizer.items()})
        blob = json.dumps(self.meta, sort_keys=True).encode("utf-8")
        named[META_CONFIG] = torch.tensor(list(blob), dtype=torch.uint8)
        return named

    @classmethod
    def from_named_tensors(cls, named: Mapping[str, torch.Tensor]) -> "Checkpoint":
        params, optimizer, meta = {}, {}, {}
        for name, value in named.items():
            if name == META_CONFIG:
                try:
                    meta = json.loads(bytes(value.tolist()).decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as e:
                    raise ArtifactError("Checkpoint config block is unreadable") from e
            elif name.startswith(OPTIM_PREFIX):
                optimizer[name[len(OPTIM_PREFIX):]] = value
            else:
                params[name] = value
        return cls(params=params, optimizer=optimizer, meta=meta)

    def save(self, path: Union[str, Path]) -> None:
        save_named_tensors(path, self.to_named_tensors())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Checkpoint":
        return cls.from_named_tensors(load_named_tensors(path))


__all__ = ["MAGIC", "save_named_tensors", "load_named_tensors", "Checkpoint"]
