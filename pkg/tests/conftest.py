import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaitfam import continuation, hybrid, models

TAU_SHORT = 0.62
TAU_LONG = 0.68


@pytest.fixture(scope="session")
def passive_model():
    return models.compass_gait()

@pytest.fixture(scope="session")
def actuated_model():
    return models.compass_gait(actuated=True)


@pytest.fixture(scope="session")
def floating_model():
    return models.compass_gait(representation="floating")


@pytest.fixture(scope="session")
def scan_result(passive_model):
    c_eq = hybrid.point_for(passive_model, np.zeros(4), 0.5)
    seeds, samples = continuation.scan_singular(
        passive_model, c_eq.x0.vector, c_eq.mu, interval=(0.1, 1.0), steps=100)
    return seeds, samples


@pytest.fixture(scope="session")
def family(passive_model):
    """The full four-branch passive family at the stock settings."""
    import time

    c_eq = hybrid.point_for(passive_model, np.zeros(4), 0.5)
    start = time.perf_counter()
    fam = continuation.build_family(passive_model, c_eq, scan_interval=(0.1, 1.0),
                                    count=250, h=0.05, steps=100)
    fam.build_seconds = time.perf_counter() - start
    return fam


@pytest.fixture(scope="session")
def small_family(passive_model):
    """A short trace for cheap structural tests."""
    c_eq = hybrid.point_for(passive_model, np.zeros(4), 0.5)
    return continuation.build_family(passive_model, c_eq, count=12, h=0.05,
                                     with_reaction=False)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def model_config(tmp_path):
    def write(name="model.json", **overrides):
        cfg = {
            "model": "compass_gait",
            "masses": {"leg": 1.0, "hip": 2.0},
            "lengths": {"a": 0.5, "b": 0.5},
            "gravity": 9.81,
            "actuated": False,
        }
        cfg.update(overrides)
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return str(path)

    return write


def circle_map():
    """Unit circle as a continuation test map."""
    return continuation.ContinuationMap(
        residual=lambda v: np.array([v[0] ** 2 + v[1] ** 2 - 1.0]),
        dim=2, m=1, kind="circle")
