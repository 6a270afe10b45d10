import numpy as np
import pytest

from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec
from lqlab.models.index_set import IndexSetSpec
from lqlab.models.process import ProcessConfig


@pytest.fixture
def gaussian4() -> EnsembleSpec:
    """Standard Gaussian ensemble in dimension 4."""
    return EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=4)


@pytest.fixture
def rademacher4() -> EnsembleSpec:
    return EnsembleSpec(family=EnsembleFamily.RADEMACHER, dimension=4)


@pytest.fixture
def sphere4() -> IndexSetSpec:
    return IndexSetSpec.sphere(4)


@pytest.fixture
def l1_ball4() -> IndexSetSpec:
    return IndexSetSpec.l1_ball(4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)


@pytest.fixture
def small_process(gaussian4, sphere4) -> ProcessConfig:
    """Cheap sup-deviation campaign on the unit sphere in R^4."""
    return ProcessConfig(
        set=sphere4,
        ensemble=gaussian4,
        q=2.0,
        N=128,
        trials=6,
        net_max_points=256,
        ascent_restarts=2,
        ascent_steps=30,
        seed=11,
    )


@pytest.fixture
def lab_output(tmp_path, monkeypatch):
    """Send default artifact directories to a temporary location."""
    from lqlab.core.config import settings

    monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path / "runs"))
    return tmp_path
