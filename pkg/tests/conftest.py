import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from heatmoments.measures import AtomicMeasure

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# six signed atoms used throughout the reproduction checks
POS_1D = [-3.11, 2.16, -2.13, 0.3, -4.37, 3.77]
AMP_1D = [4.0071, -4.6658, 4.5695, -3.6279, -2.1617, 1.0608]
POS_2D = [(-1.30, -2.27), (-1.43, 0.08), (3.9, -3.69), (3.72, 2.57), (3.04, -0.91), (-3.96, -0.52)]
AMP_2D = [2.6832, 0.6610, -2.5463, 0.4501, -3.5543, -0.5107]


@pytest.fixture
def six_atoms_1d():
    return AtomicMeasure(POS_1D, AMP_1D)


@pytest.fixture
def six_atoms_2d():
    return AtomicMeasure(np.array(POS_2D), AMP_2D)
