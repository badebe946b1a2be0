import math

import numpy as np
import pytest
import torch

from conftest import random_field
from gaugeflow.errors import ConfigError, ConformabilityError
from gaugeflow.geometry.fields import Grid, MultiField, ScalarField, VectorField, norm, shift
from gaugeflow.geometry.lieflow import (FlowConfig, Generator, GeneratorBasis, GeneratorKind, assemble,
                                        generator_field, linearized_residual, orbit_direction,
                                        trace_characteristics, warp)


def test_flow_config_validation():
    with pytest.raises(ConfigError):
        FlowConfig(1.0, substeps=0)
    with pytest.raises(ConfigError):
        FlowConfig(float("inf"))


def test_custom_generator_needs_field(grid):
    with pytest.raises(ConfigError):
        Generator(GeneratorKind.Custom)
    with pytest.raises(ConfigError):
        Generator(GeneratorKind.TranslateX, VectorField.constant(grid, 1.0, 0.0))


def test_generator_fields(grid):
    rot = generator_field(Generator(GeneratorKind.Rotate), grid)
    i, j = grid.ny // 2, grid.nx // 2  # the node at (0.5, 0.5)
    assert float(rot.ux[i, j]) == 0.0 and float(rot.uy[i, j]) == 0.0
    tx = generator_field(Generator(GeneratorKind.TranslateX), grid)
    assert torch.all(tx.ux == 1) and torch.all(tx.uy == 0)
    assert not GeneratorBasis.from_kinds("TranslateX", "Rotate").exact
    assert GeneratorBasis.from_kinds("TranslateX", "TranslateY").exact


def test_zero_time_and_zero_field_are_bit_exact(grid, smooth, translations):
    phi = random_field(grid, 0, channels=2, amplitude=0.3)
    X = assemble(translations, phi)
    assert torch.equal(warp(smooth, X, FlowConfig(0.0)).values, smooth.values)
    assert torch.equal(warp(smooth, VectorField.constant(grid, 0.0, 0.0), FlowConfig(1.0)).values, smooth.values)


@pytest.mark.parametrize("kx, ky", [(1, 0), (3, 0), (0, 2), (5, -4)])
def test_integer_shift_oracle(grid, smooth, kx, ky):
    X = VectorField.constant(grid, kx * grid.hx, ky * grid.hy)
    out = warp(smooth, X, FlowConfig(1.0, substeps=4))
    torch.testing.assert_close(out.values, shift(smooth, kx, ky).values, atol=1e-12, rtol=0)


def test_constant_flow_semigroup(grid, smooth):
    X = VectorField.constant(grid, grid.hx, 0.0)
    twice = warp(warp(smooth, X, FlowConfig(2.0)), X, FlowConfig(3.0))
    torch.testing.assert_close(twice.values, warp(smooth, X, FlowConfig(5.0)).values, atol=1e-12, rtol=0)


def test_rk4_order_on_rotation():
    grid = Grid(32, 32)
    X = generator_field(Generator(GeneratorKind.Rotate), grid)
    xx, yy = grid.coords()
    inner = ((xx - 0.5).abs() < 0.25) & ((yy - 0.5).abs() < 0.25)
    t = 1.0
    # backward characteristics of the rotation field turn clockwise by t
    ex = 0.5 + (xx - 0.5) * math.cos(t) + (yy - 0.5) * math.sin(t)
    ey = 0.5 - (xx - 0.5) * math.sin(t) + (yy - 0.5) * math.cos(t)
    errors = []
    for n in (4, 8):
        px, py = trace_characteristics(X, FlowConfig(t, n))
        err = torch.sqrt((px * grid.hx - ex) ** 2 + (py * grid.hy - ey) ** 2)[inner].max()
        errors.append(float(err))
    ratio = errors[0] / errors[1]
    assert 12 < ratio < 20


def test_linearization_slope():
    grid = Grid(512, 512)
    S = ScalarField.from_function(grid, lambda x, y: torch.sin(2 * math.pi * x))
    basis = GeneratorBasis.from_kinds("TranslateX")
    phi = MultiField.stack([ScalarField.from_function(grid, lambda x, y: 1 + 0.3 * torch.sin(2 * math.pi * y))])
    X = assemble(basis, phi)
    r_lin = linearized_residual(S, basis, phi)
    eps = np.array([0.1, 0.05, 0.025])
    errors = [norm(warp(S, X, FlowConfig(float(e))) - S - float(e) * r_lin) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(errors), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_unit_control_gives_orbit_direction(grid, smooth, translations):
    phi = MultiField.constant(grid, [1.0, 0.0])
    r = linearized_residual(smooth, translations, phi)
    e1 = orbit_direction(smooth, translations[0])
    torch.testing.assert_close(r.values, e1.values, atol=0, rtol=0)


def test_orbit_direction_of_sine(grid):
    S = ScalarField.from_function(grid, lambda x, y: torch.sin(2 * math.pi * x))
    e = orbit_direction(S, Generator(GeneratorKind.TranslateX))
    expected = -math.sin(2 * math.pi * grid.hx) / grid.hx * torch.cos(2 * math.pi * grid.coords()[0])
    torch.testing.assert_close(e.values, expected, atol=1e-10, rtol=0)


def test_channel_mismatch(grid, smooth, translations):
    with pytest.raises(ConformabilityError):
        assemble(translations, MultiField.zeros(grid, 3))
    with pytest.raises(ConformabilityError):
        linearized_residual(smooth, translations, MultiField.zeros(grid, 1))
