import numpy as np
import pytest

from meshkit.grid import make_grid
from meshkit.parallel import SimComm


def run_ranks(P, task, *args, sequential=True, **kwargs):
    """Run ``task(ctx, ...)`` on P simulated ranks and return per-rank results."""
    return SimComm(P, sequential=sequential).run(task, *args, **kwargs)


@pytest.fixture(scope="session")
def o16():
    return make_grid("O16")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
