"""
Shared pytest fixtures for aelpn tests.

Small models (n = 8, two hidden layers) keep the structural tests fast; the
long-running acceptance experiments are marked ``slow`` and only run with
``--runslow``.
"""

import numpy as np
import pytest

from aelpn.checkpoint import Checkpoint
from aelpn.core.rng import Rng
from aelpn.data.pnm import write_pnm
from aelpn.data.synthetic import SyntheticImageSpec, synth_image
from aelpn.potential import build_model, quadratic_model


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow acceptance experiments"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """A fresh root stream with a fixed seed"""
    return Rng(1234)


@pytest.fixture
def ae_model():
    """Untrained affine-equivariant model, n = 8"""
    return build_model("ae", 8, (8, 8), Rng(0).stream("init"))


@pytest.fixture
def plain_model():
    """Untrained plain LPN, n = 8"""
    return build_model("lpn", 8, (8, 8), Rng(0).stream("init"))


@pytest.fixture
def scale_model():
    """Untrained scale-equivariant model, n = 8"""
    return build_model("scale", 8, (8, 8), Rng(0).stream("init"))


@pytest.fixture
def shift_model():
    """Untrained shift-equivariant model, n = 8"""
    return build_model("shift", 8, (8, 8), Rng(0).stream("init"))


@pytest.fixture
def quarter_model():
    """psi(y) = y^2 / 4 in one dimension, so f(y) = y / 2"""
    return quadratic_model(1, 0.5)


@pytest.fixture
def identity_model():
    """psi(y) = |y|^2 / 2 in four dimensions, so f is the identity"""
    return quadratic_model(4, 1.0)


@pytest.fixture
def checkpoint_file(tmp_path, ae_model):
    """An AE checkpoint on disk"""
    path = tmp_path / "ae.ckpt"
    Checkpoint(ae_model, seed=3, metadata={"patch": [2, 4]}).save(path)
    return path


@pytest.fixture
def image_dir(tmp_path):
    """Directory with five small synthetic PGM images"""
    directory = tmp_path / "images"
    directory.mkdir()
    spec = SyntheticImageSpec(height=24, width=24)
    stream = Rng(5).stream("images")
    for i in range(5):
        write_pnm(directory / f"img{i}.pgm", synth_image(spec, stream))
    return directory


def random_signals(seed: int, rows: int, n: int) -> np.ndarray:
    return Rng(seed).normal((rows, n))
