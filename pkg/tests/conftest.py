"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from adjpod import CoefficientSet, assemble_operators, build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(13, 11)


@pytest.fixture(scope="session")
def small_ops(small_grid):
    return assemble_operators(small_grid, CoefficientSet(q=1.0, c=0.0))


@pytest.fixture(scope="session")
def desk_grid():
    return build_grid(33, 33)


@pytest.fixture(scope="session")
def desk_ops(desk_grid):
    return assemble_operators(desk_grid, CoefficientSet(q=1.0, c=0.0))
