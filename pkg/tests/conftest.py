from pathlib import Path

import pytest

from tools.models import BallDomain, BoxDomain, ConstantRadius, ProcessParams

FIXTURES = Path(__file__).parent / "fixtures"
CONFIGS = Path(__file__).parents[1] / "configs"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS


@pytest.fixture
def unit_ball() -> BallDomain:
    return BallDomain(radius=1.0)


@pytest.fixture
def unit_box() -> BoxDomain:
    return BoxDomain(half_widths=(0.5, 0.5, 0.5))


@pytest.fixture
def constant_params() -> ProcessParams:
    return ProcessParams(intensity=1.0, radius_law=ConstantRadius(value=1.0), seed=7)
