import math

import pytest
import torch

from conftest import random_field
from gaugeflow.errors import ConfigError, ConformabilityError, NumericError
from gaugeflow.geometry.fields import (Grid, MultiField, ScalarField, VectorField, dirichlet, divergence, grad,
                                       inner_product, integrate, laplacian, norm, shift)


def test_grid_validation():
    with pytest.raises(ConfigError):
        Grid(3, 8)
    with pytest.raises(ConfigError):
        Grid(8.0, 8)
    g = Grid(8, 4)
    assert g.shape == (4, 8)
    assert g.measure == pytest.approx(1 / 32)


def test_constant_one_has_unit_norm(grid):
    one = ScalarField.constant(grid, 1.0)
    assert norm(one) == pytest.approx(1.0, abs=1e-14)
    assert float(integrate(ScalarField.constant(grid, 2.5))) == pytest.approx(2.5, abs=1e-14)


def test_summation_by_parts(grid):
    f = random_field(grid, 0)
    U = VectorField(grid, random_field(grid, 1).values, random_field(grid, 2).values)
    lhs = float(inner_product(grad(f), U))
    rhs = -float(inner_product(f, divergence(U)))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_laplacian_is_minus_div_grad_and_self_adjoint(grid):
    f, g = random_field(grid, 3), random_field(grid, 4)
    torch.testing.assert_close(laplacian(f).values, -divergence(grad(f)).values, atol=1e-10, rtol=0)
    assert float(inner_product(laplacian(f), g)) == pytest.approx(float(inner_product(f, laplacian(g))), abs=1e-10)


def test_laplacian_eigenvalue(grid):
    f = ScalarField.from_function(grid, lambda x, y: torch.sin(2 * math.pi * x))
    lam = math.sin(2 * math.pi * grid.hx) ** 2 / grid.hx**2
    torch.testing.assert_close(laplacian(f).values, lam * f.values, atol=1e-10, rtol=0)


def test_dirichlet_matches_laplacian_pairing(grid):
    phi = random_field(grid, 5, channels=2)
    assert float(dirichlet(phi)) == pytest.approx(float(inner_product(laplacian(phi), phi)), abs=1e-10)


def test_shift(grid):
    f = random_field(grid, 6)
    assert torch.equal(shift(f, grid.nx, 0).values, f.values)
    s = shift(f, 1, 0)
    assert torch.equal(s.values[:, 1:], f.values[:, :-1])
    assert torch.equal(s.values[:, 0], f.values[:, -1])
    assert norm(shift(f, 3, 5)) == pytest.approx(norm(f), abs=1e-14)


def test_arithmetic(grid):
    f, g = random_field(grid, 7), random_field(grid, 8)
    torch.testing.assert_close((2 * f - g).values, 2 * f.values - g.values)
    torch.testing.assert_close((1 - f).values, 1 - f.values)
    phi = random_field(grid, 9, channels=3)
    assert phi.square_norm().values.shape == grid.shape
    assert MultiField.constant(grid, [1.0, -2.0]).channels == 2


def test_conformability(grid):
    other = Grid(8, 8)
    with pytest.raises(ConformabilityError):
        ScalarField.zeros(grid) + ScalarField.zeros(other)
    with pytest.raises(ConformabilityError):
        inner_product(ScalarField.zeros(grid), MultiField.zeros(grid, 1))
    with pytest.raises(ConformabilityError):
        MultiField.zeros(grid, 2) + MultiField.zeros(grid, 3)
    with pytest.raises(ConformabilityError):
        ScalarField(grid, torch.zeros(4, 4, dtype=torch.float64))


def test_non_finite_values_rejected(grid):
    values = torch.zeros(grid.shape, dtype=torch.float64)
    values[0, 0] = float("nan")
    with pytest.raises(NumericError):
        ScalarField(grid, values)
