"""Shared fixtures: small grids, masks and Φ-functions."""

import math

import numpy as np
import pytest

from src.modules.dirichlet_solver import DomainMask
from src.modules.phi_functions import PhiFunction
from src.modules.spectral_ops import Grid


@pytest.fixture
def grid1():
    return Grid(1, 64, 2.0 * math.pi)


@pytest.fixture
def grid2():
    return Grid(2, 16, 2.0 * math.pi)


@pytest.fixture
def ball1(grid1):
    return DomainMask.ball(grid1, 1.2)


@pytest.fixture
def torus1(grid1):
    return DomainMask.full(grid1)


@pytest.fixture
def quadratic():
    """A(ℓ) = ℓ²/2, so a ≡ 1 and the Dirichlet operator is linear."""
    return PhiFunction.power(2.0, scale=0.5)


@pytest.fixture
def double_phase(grid1):
    x = grid1.coordinates()[0]
    alpha = 0.5 + 0.5 * (1.0 + np.cos(x))
    return PhiFunction.double_phase(2.0, 3.0, alpha)


@pytest.fixture
def write_config(tmp_path):
    """Write a TOML file into tmp_path and return its path."""
    def write(text: str, name: str = 'run.toml'):
        path = tmp_path / name
        path.write_text(text)
        return path
    return write
