#!/usr/bin/env python3
"""
Shared fixtures for the SPDDSMBN test suite.

Experiment-scale checks are marked slow and only run with --runslow.
"""

import copy
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from geometry.manifold import random_spd  # noqa: E402
from models.config import TsmNetConfig  # noqa: E402
from src.run_config import parse_run_config  # noqa: E402
from synthdata.config import GenConfig  # noqa: E402
from synthdata.dataset import simulate_dataset  # noqa: E402


TINY_RUN = {
    "seed": 0,
    "generator": {
        "channels": 4, "time": 32, "sources": 3, "discriminative_sources": 2, "classes": 2,
        "source_domains": 3, "target_domains": 2, "trials_per_domain": 16, "fir_length": 3,
    },
    "model": {
        "net": {"channels": 4, "time": 32, "temporal_filters": 2, "temporal_kernel": 5,
                "spatio_spectral_filters": 6, "subspace_dim": 3},
    },
    "protocol": {"epochs": 2, "domains_per_batch": 3, "trials_per_domain": 4},
    "ablation": {"seeds": [0], "permutations": 50},
    "experiment": {"dim": 3, "steps": 50, "seeds": 2, "dataset_size": 100,
                   "replicates": 4, "replicate_steps": 10},
}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run experiment-scale checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: experiment-scale check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def spd(rng):
    """Factory for seeded random SPD matrices: spd(dim, size=None, spread=1.0)"""
    def make(dim, size=None, spread=1.0):
        return random_spd(dim, rng, spread=spread, size=size)
    return make


@pytest.fixture
def tiny_net():
    return TsmNetConfig(channels=4, time=32, classes=2, temporal_filters=2, temporal_kernel=5,
                        spatio_spectral_filters=6, subspace_dim=3)


@pytest.fixture
def tiny_gen():
    return GenConfig(**TINY_RUN["generator"])


@pytest.fixture
def tiny_dataset(tiny_gen):
    return simulate_dataset(tiny_gen, seed=7)


@pytest.fixture
def tiny_run_config():
    return parse_run_config(TINY_RUN)


@pytest.fixture
def tiny_run_dict():
    return copy.deepcopy(TINY_RUN)
