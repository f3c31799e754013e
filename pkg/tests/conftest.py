import pytest

from models import PipelineConfig
from numerics import Rng
from surrogate import init_weights


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run end-to-end cloning and scheduler-training checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_config():
    return PipelineConfig(tokens=4, hidden=8, depth=3, refinement_steps=3, head_hidden=8)


@pytest.fixture
def default_config():
    return PipelineConfig()


@pytest.fixture
def small_weights(small_config):
    return init_weights(small_config, Rng(7)).freeze()


@pytest.fixture
def default_weights(default_config):
    return init_weights(default_config, Rng(11)).freeze()
