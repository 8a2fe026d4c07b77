import pytest
import torch

from focus_iir.config import FocusConfig
from focus_iir.model.layer import FocusLayer


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_layer(seed: int = 0, **overrides) -> FocusLayer:
    """A standalone layer, deterministically initialized."""
    config = FocusConfig(**{"L": 16, "width": 2, "nfft": 4, "chunk": 4, **overrides})
    layer = FocusLayer(config)
    layer.reset_parameters(torch.Generator().manual_seed(seed))
    return layer


@pytest.fixture()
def small_layer() -> FocusLayer:
    return make_layer()


@pytest.fixture()
def gen() -> torch.Generator:
    return torch.Generator().manual_seed(1234)
