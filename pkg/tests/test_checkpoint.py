import struct

import pytest
import torch

from focus_iir.errors import ArtifactError
from focus_iir.tensor.checkpoint import MAGIC, Checkpoint, load_named_tensors, save_named_tensors


@pytest.fixture()
def tensors():
    return {
        "layer0.q": torch.arange(6, dtype=torch.float64).reshape(2, 3) / 7,
        "spectrum": torch.tensor([1 + 2j, -0.5j], dtype=torch.complex128),
        "tokens": torch.tensor([[3, 1], [4, 1]], dtype=torch.int64),
        "blob": torch.tensor([0, 255, 7], dtype=torch.uint8),
        "scalar": torch.tensor(2.5, dtype=torch.float64),
    }


def test_save_and_load_preserves_names_order_and_values(tmp_path, tensors):
    path = tmp_path / "x.focus"
    save_named_tensors(path, tensors)
    loaded = load_named_tensors(path)
    assert list(loaded) == list(tensors)
    for name, value in tensors.items():
        assert loaded[name].dtype == value.dtype
        assert torch.equal(loaded[name], value)


def test_header_layout(tmp_path):
    path = tmp_path / "h.focus"
    save_named_tensors(path, {"ab": torch.tensor([1.0], dtype=torch.float64)})
    blob = path.read_bytes()
    assert blob[:6] == b"FOCUS1"
    assert struct.unpack("<Q", blob[6:14]) == (1,)
    assert struct.unpack("<Q", blob[14:22]) == (2,)
    assert blob[22:24] == b"ab"
    assert blob[24] == 0  # real64 tag
    assert struct.unpack("<d", blob[-8:]) == (1.0,)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.focus"
    path.write_bytes(b"NOTFOC" + b"\x00" * 8)
    with pytest.raises(ArtifactError, match="magic"):
        load_named_tensors(path)


def test_truncated_file(tmp_path, tensors):
    path = tmp_path / "t.focus"
    save_named_tensors(path, tensors)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(ArtifactError, match="truncated"):
        load_named_tensors(path)


def test_unknown_dtype_tag(tmp_path):
    path = tmp_path / "tag.focus"
    path.write_bytes(MAGIC + struct.pack("<QQ", 1, 1) + b"x" + struct.pack("<BQ", 9, 0))
    with pytest.raises(ArtifactError, match="dtype tag"):
        load_named_tensors(path)


def test_missing_file(tmp_path):
    with pytest.raises(ArtifactError):
        load_named_tensors(tmp_path / "nope.focus")


def test_unsupported_dtype_on_save(tmp_path):
    with pytest.raises(ArtifactError):
        save_named_tensors(tmp_path / "f32.focus", {"w": torch.zeros(2, dtype=torch.float32)})


def test_checkpoint_bundle_round_trip(tmp_path):
    ckpt = Checkpoint(
        params={"embed.weight": torch.ones(3, 2, dtype=torch.float64)},
        optimizer={"embed.weight.step": torch.tensor(4.0, dtype=torch.float64)},
        meta={"model": {"L": 30, "width": 2}, "epoch": 3},
    )
    ckpt.save(tmp_path / "c.focus")
    back = Checkpoint.load(tmp_path / "c.focus")
    assert back.meta == {"model": {"L": 30, "width": 2}, "epoch": 3}
    assert list(back.params) == ["embed.weight"]
    assert torch.equal(back.params["embed.weight"], ckpt.params["embed.weight"])
    assert float(back.optimizer["embed.weight.step"]) == 4.0
