import math

import pytest
import torch

from gaugeflow.geometry.fields import Grid, MultiField, ScalarField
from gaugeflow.geometry.lieflow import GeneratorBasis


def random_field(grid: Grid, seed: int, channels: int | None = None, amplitude: float = 1.0):
    g = torch.Generator().manual_seed(seed)
    if channels is None:
        return ScalarField(grid, amplitude * (2 * torch.rand(grid.shape, generator=g, dtype=torch.float64) - 1))
    return MultiField(grid, amplitude * (2 * torch.rand((channels, *grid.shape), generator=g, dtype=torch.float64) - 1))


@pytest.fixture
def grid():
    return Grid(16, 16)


@pytest.fixture
def grid32():
    return Grid(32, 32)


@pytest.fixture
def translations():
    return GeneratorBasis.from_kinds("TranslateX", "TranslateY")


@pytest.fixture
def smooth(grid):
    """A smooth signal with a full-rank orbit; the half shift in y is its only grid symmetry."""
    return ScalarField.from_function(
        grid, lambda x, y: torch.sin(2 * math.pi * x) + 0.5 * torch.cos(2 * math.pi * (x + 2 * y)) + 0.3 * torch.sin(4 * math.pi * y))


@pytest.fixture
def small_signal(grid):
    return ScalarField.from_function(grid, lambda x, y: 0.05 * (torch.sin(2 * math.pi * x) + 0.3 * torch.sin(4 * math.pi * y)))
