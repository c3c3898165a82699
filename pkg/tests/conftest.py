import numpy as np
import pytest

from lppm.ingest import build_grid_scenario


@pytest.fixture(scope="session")
def grid():
    """The 25-POI tagged square grid with uniform prior."""
    return build_grid_scenario()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
