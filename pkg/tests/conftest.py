import numpy as np
import pytest

from fuelcvx import DiscreteInputSet, LtiSystem


@pytest.fixture
def double_integrator():
    return LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])


@pytest.fixture
def set_1d():
    """The three-point set {0, +1, -1}."""
    return DiscreteInputSet(m=1, u_max=1.0)


@pytest.fixture
def set_2d_with_w():
    return DiscreteInputSet(m=2, u_max=1.0, W=[[0.5, 0.5], [-0.25, 0.25]])
