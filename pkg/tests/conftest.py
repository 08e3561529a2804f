import numpy as np
import pytest

from atomlaser.constants import K_B
from atomlaser.grid import make_system_state, uniform_grid
from atomlaser.trap import rb87_trap


@pytest.fixture(scope="session")
def ts():
    """Default trap and species used throughout."""
    return rb87_trap()


@pytest.fixture(scope="session")
def kbt540(ts):
    return K_B * 540e-9


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture()
def small_state(ts, kbt540, rng):
    """24-node random smooth occupation with a condensate, for oracle
    comparisons."""
    grid = uniform_grid(3.0 * kbt540, 24)
    x = grid.nodes / kbt540
    g = (1.5 + np.sin(2.1 * x) * 0.8 + rng.uniform(0, 0.3, grid.n)) \
        * np.exp(-x)
    g[0] = 0.0
    return make_system_state(2.0e5, g, grid, ts)
