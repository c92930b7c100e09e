"""Shared fixtures: small grids and a seeded generator."""

import numpy as np
import pytest

from taxislab.fields import make_grid


@pytest.fixture
def grid1d():
    return make_grid(1, [1.0], [32])


@pytest.fixture
def grid2d():
    # anisotropic on purpose: catches axis mix-ups in the stencils
    return make_grid(2, [1.0, 0.5], [12, 10])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
