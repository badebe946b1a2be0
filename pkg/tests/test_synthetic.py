import math

import numpy as np
import pytest
import torch

from conftest import random_field
from gaugeflow.config import TaskConfig
from gaugeflow.errors import ConfigError, ConformabilityError
from gaugeflow.geometry.fields import Grid, ScalarField, inner_product, shift
from gaugeflow.tasks.synthetic import (SyntheticTask, clarke_subgradient, correlation, eval_F, eval_W,
                                       invariance_audit, make_task, smooth_signal)


def directional(task, S, d, h=1e-6):
    return (eval_F(task, S + h * d) - eval_F(task, S - h * d)) / (2 * h)


def bump(grid):
    return ScalarField.from_function(grid, lambda x, y: torch.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / 0.01))


class TestTasks:

    def test_template_match_is_on_the_boundary(self, smooth):
        task = SyntheticTask("TemplateCorr", float(inner_product(smooth, smooth)), template=smooth)
        assert eval_F(task, smooth) == pytest.approx(0.0, abs=1e-12)

    def test_norm_band(self, grid):
        task = SyntheticTask("NormBand", 0.8)
        assert eval_F(task, ScalarField.constant(grid, 1.0)) == pytest.approx(-0.2, abs=1e-14)

    def test_cost_is_two_valued(self, grid):
        task = SyntheticTask("NormBand", 1.0, w0=0.5, w1=2.0)
        assert eval_W(task, ScalarField.constant(grid, 2.0)) == 0.5
        assert eval_W(task, ScalarField.constant(grid, 0.1)) == 2.0
        # F = 0 exactly belongs to the low-cost cell
        assert eval_W(task, ScalarField.constant(grid, 1.0)) == 0.5

    def test_lipschitz_defaults(self, smooth):
        assert SyntheticTask("NormBand", 1.0).L == 2.0
        assert SyntheticTask("SmoothQuadratic", 1.0, lipschitz=5.0).L == 5.0
        assert SyntheticTask("TemplateCorr", 1.0, template=smooth).L == 0.0
        assert not SyntheticTask("LinearProbe", 1.0, mask=smooth).invariant

    @pytest.mark.parametrize("kwargs", [
        dict(kind="Bogus", theta=1.0),
        dict(kind="NormBand", theta=1.0, w0=1.0, w1=1.0),
        dict(kind="TemplateCorr", theta=1.0),
        dict(kind="LinearProbe", theta=1.0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SyntheticTask(**kwargs)


class TestSubgradient:

    def test_smooth_quadratic_gradient(self, grid, smooth):
        task = SyntheticTask("SmoothQuadratic", 2.0)
        g, tie = clarke_subgradient(task, smooth)
        assert not tie
        for seed in range(5):
            d = random_field(grid, seed)
            assert directional(task, smooth, d) == pytest.approx(float(inner_product(g, d)), rel=1e-6, abs=1e-10)

    def test_template_gradient_away_from_ties(self, grid, smooth):
        # break the half shift in y so that no grid translation fixes S
        S = smooth + ScalarField.from_function(grid, lambda x, y: 0.2 * torch.sin(2 * math.pi * y))
        assert all(not torch.equal(shift(S, 0, k).values, S.values) for k in range(1, grid.ny))
        template = random_field(grid, 11)
        task = SyntheticTask("TemplateCorr", 1.0, template=template)
        g, tie = clarke_subgradient(task, S)
        assert not tie
        d = random_field(grid, 12)
        assert directional(task, S, d, h=1e-8) == pytest.approx(float(inner_product(g, d)), rel=1e-5)

    def test_tie_picks_smallest_shift(self, grid):
        T = bump(grid)
        S = T + shift(T, grid.nx // 2, 0)
        task = SyntheticTask("TemplateCorr", 1.0, template=T)
        g, tie = clarke_subgradient(task, S)
        assert tie
        torch.testing.assert_close(g.values, -T.values, atol=0, rtol=0)

    def test_supergradient_inequality(self, grid, smooth):
        # F is a negated maximum of linear maps, so g bounds it from above
        task = SyntheticTask("TemplateCorr", 1.0, template=random_field(grid, 13))
        g, _ = clarke_subgradient(task, smooth)
        F0 = eval_F(task, smooth)
        for seed in range(10):
            r = random_field(grid, 20 + seed, amplitude=0.5)
            assert eval_F(task, smooth + r) <= F0 + float(inner_product(g, r)) + 1e-10


def test_correlation_matches_direct_pairing(grid, smooth):
    T = random_field(grid, 14)
    c = correlation(T, smooth)
    for kx, ky in [(0, 0), (3, 1), (15, 7)]:
        assert float(c[ky, kx]) == pytest.approx(float(inner_product(shift(T, kx, ky), smooth)), abs=1e-12)
    with pytest.raises(ConformabilityError):
        correlation(T, ScalarField.zeros(Grid(8, 8)))


def test_smooth_signal(grid):
    S = smooth_signal(grid, 0.5, 3, seed=4)
    assert math.sqrt(float((S.values**2).mean())) == pytest.approx(0.5, rel=1e-12)
    assert torch.equal(S.values, smooth_signal(grid, 0.5, 3, seed=4).values)
    assert not torch.equal(S.values, smooth_signal(grid, 0.5, 3, seed=5).values)


@pytest.mark.parametrize("kind", ["TemplateCorr", "NormBand", "SmoothQuadratic", "LinearProbe"])
def test_make_task_gap(grid, kind):
    S = smooth_signal(grid, 0.5, 3, seed=0)
    task = make_task(TaskConfig(kind=kind, gap=0.05), S, seed=0)
    F = eval_F(task, S)
    assert F > 0 and eval_W(task, S) == task.w1
    assert make_task(TaskConfig(kind=kind, theta=-3.0), S, seed=0).theta == -3.0


class TestAudit:

    @pytest.mark.parametrize("kind", ["TemplateCorr", "NormBand", "SmoothQuadratic"])
    def test_invariant_tasks_pass(self, grid, kind):
        S = smooth_signal(grid, 0.5, 3, seed=1)
        task = make_task(TaskConfig(kind=kind), S, seed=1)
        audit = invariance_audit(task, S, 20, np.random.default_rng(0))
        assert not audit.violation and audit.shifts == 20

    def test_probe_is_caught(self, grid):
        S = smooth_signal(grid, 0.5, 3, seed=1)
        task = make_task(TaskConfig(kind="LinearProbe"), S, seed=1)
        assert invariance_audit(task, S, 20, np.random.default_rng(0)).violation

    def test_needs_samples(self, grid, smooth):
        with pytest.raises(ConfigError):
            invariance_audit(SyntheticTask("NormBand", 1.0), smooth, 0, np.random.default_rng(0))
