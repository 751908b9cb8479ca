"""Shared fixtures for the SPDRF test suite"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Project root on the path so tests import like the application does
project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from config import BackboneConfig, PaceSchedule, SyntheticSpec, TrainConfig  # noqa: E402
from src.core.dataset import synth_generate  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow benchmark tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-seed benchmark runs (use --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_config():
    """Tiny model and schedule that trains in well under a second"""
    return TrainConfig(
        tree_count=2,
        tree_depth=2,
        backbone=BackboneConfig(input_dim=3, hidden_dims=[8], output_dim=6, seed=0),
        pace=PaceSchedule(fractions=[0.5, 1.0], exclude_fraction=0.05),
        batch_size=8,
        steps_per_pace=20,
        pretrain_steps=20,
        leaf_update_period=5,
        learning_rate=0.05,
        seed=0,
    )


@pytest.fixture
def small_spec():
    return SyntheticSpec(n_samples=80, n_test=40, feature_dim=3, noise_std=1.0,
                         outlier_fraction=0.1, outlier_shift=20.0, seed=0)


@pytest.fixture
def small_split(small_spec):
    return synth_generate(small_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
