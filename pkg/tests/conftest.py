import pytest
from hypothesis import settings

from tfrac.covmodel import CovarianceModel

settings.register_profile("tfrac", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("tfrac")

GRID_H = (0.3, 0.5, 0.7, 1.2)
GRID_LAM = (0.1, 1.0, 10.0)
KINDS = ("I", "II")


@pytest.fixture(scope="session")
def bm_half():
    """Kind I, H = 1/2, lambda = 1: the case with elementary closed forms."""
    return CovarianceModel.of("I", 0.5, 1.0)
