import numpy as np
import pytest

from krda.data import MoonsSpec, gen_moons
from krda.trainer import TrainConfig, fit_joint

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def moons_model():
    """A jointly trained model: 300 unrotated vs 300 moons rotated by 40 degrees."""
    source = gen_moons(MoonsSpec(300, 0.1, 0.0, 1))
    target = gen_moons(MoonsSpec(300, 0.1, 40.0, 2))
    model = fit_joint(source, target, cfg=TrainConfig(epochs=300, seed=3))
    return model, source, target


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
