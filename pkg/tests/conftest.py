import pytest

from annctl.config import RunConfig
from annctl.pipeline import identify, train_system


@pytest.fixture(scope="session")
def default_cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def default_ident(default_cfg):
    return identify(default_cfg, default_cfg.master_seed)


@pytest.fixture(scope="session")
def default_system(default_cfg, default_ident):
    return train_system(default_cfg, ident=default_ident)
