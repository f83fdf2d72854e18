import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance_report():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _acceptance_lines.append


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)

from locfit.data import normalize_coords, synth_dataset_pair
from locfit.models import SimoConfig, SisoConfig
from locfit.sdae import SdaeConfig
from locfit.training import TrainConfig


@pytest.fixture(scope="session")
def tiny_pair():
    """Small shared-building train/test pair for harness tests."""
    return synth_dataset_pair(11, 24, 3, 120, 60)


@pytest.fixture(scope="session")
def tiny_norm(tiny_pair):
    _, norm = normalize_coords(tiny_pair[0].coords[:, :2])
    return norm


@pytest.fixture(scope="session")
def tiny_sdae():
    return SdaeConfig(hidden_dims=(16,), corruption_level=0.1,
                      epochs_per_layer=2, batch_size=32)


@pytest.fixture(scope="session")
def tiny_simo(tiny_sdae):
    return SimoConfig(sdae=tiny_sdae, common_hidden=16, floor_branch_hidden=8,
                      coord_branch_hidden=8, n_floors=3)


@pytest.fixture(scope="session")
def tiny_siso(tiny_sdae):
    return SisoConfig(sdae=tiny_sdae, hidden=16)


@pytest.fixture(scope="session")
def tiny_train_config():
    return TrainConfig(max_epochs=4, batch_size=32, val_fraction=0.2, patience=10)
