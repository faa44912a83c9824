import numpy as np
import pytest

from bvtransport import ConstructionVariant, assemble_field, exact_solution
from bvtransport.kernels import active_lane, set_lane


@pytest.fixture(scope="session")
def outward4():
    return assemble_field(ConstructionVariant("outward", 4))


@pytest.fixture(scope="session")
def outward4_solution():
    return exact_solution(ConstructionVariant("outward", 4))


@pytest.fixture
def lane_restore():
    """Restore the kernel lane after a test that switches it."""
    before = active_lane()
    yield
    set_lane(before)


def staggered(lo, n, width):
    """Probe axis at odd multiples of width/(2n): never on a dyadic edge."""
    return lo + (2 * np.arange(n) + 1) * (width / (2 * n))
