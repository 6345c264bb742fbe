import pytest

from armsim.experiments import load_default_config


@pytest.fixture(scope="session")
def cfg():
    return load_default_config()


@pytest.fixture(scope="session")
def axis_z(cfg):
    return cfg.axes["z"]


@pytest.fixture(scope="session")
def axis_x(cfg):
    return cfg.axes["x"]


@pytest.fixture(scope="session")
def axis_y(cfg):
    return cfg.axes["y"]
