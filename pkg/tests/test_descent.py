import math

import pytest
import torch

from conftest import random_field
from gaugeflow.config import EnergyConfig, MCConfig, OptConfig, TaskConfig, WeakConfig
from gaugeflow.engine.descent_engine import DescentEngine
from gaugeflow.errors import ConfigError
from gaugeflow.geometry.fields import Grid, MultiField, ScalarField, inner_product, norm
from gaugeflow.geometry.lieflow import GeneratorBasis
from gaugeflow.geometry.orbit import OrbitBasis, gram
from gaugeflow.tasks.descent import (descent_bound, pure_descent, reachability, signed_rank_summary, slice_crossing,
                                     task_normal, weak_descent)
from gaugeflow.tasks.synthetic import SyntheticTask, eval_F, make_task, smooth_signal


@pytest.fixture
def sine_orbit(grid):
    S = ScalarField.from_function(grid, lambda x, y: torch.sin(2 * math.pi * x))
    orbit = OrbitBasis.at(S, GeneratorBasis.from_kinds("TranslateX"))
    return S, orbit, gram(orbit)


class TestTaskNormal:

    def test_step_targets(self, grid, sine_orbit):
        _, orbit, gdata = sine_orbit
        # normal to the orbit, unit L² norm
        g = ScalarField.from_function(grid, lambda x, y: math.sqrt(2) * torch.sin(2 * math.pi * y))
        sub = task_normal(g, orbit, gdata, 0.375, 1.0)
        assert sub.g_N_norm == pytest.approx(1.0, abs=1e-12)
        assert sub.eps_minus == pytest.approx(0.5, abs=1e-10)
        assert sub.dN == pytest.approx(0.375, abs=1e-12)
        torch.testing.assert_close(sub.nhat.values, -g.values, atol=1e-12, rtol=0)
        assert task_normal(g, orbit, gdata, 0.1, 0.0).eps_minus == pytest.approx(0.1, abs=1e-12)

    def test_infeasible_step(self, grid, sine_orbit):
        _, orbit, gdata = sine_orbit
        g = ScalarField.from_function(grid, lambda x, y: math.sqrt(2) * torch.sin(2 * math.pi * y))
        sub = task_normal(g, orbit, gdata, 1.0, 1.0)
        assert sub.normal_feasible and not sub.step_feasible

    def test_orbit_gradient_has_no_normal(self, sine_orbit):
        _, orbit, gdata = sine_orbit
        sub = task_normal(orbit.e[0], orbit, gdata, 0.1, 2.0)
        assert not sub.normal_feasible and sub.dN is None

    def test_normal_is_orthogonal_to_orbit(self, grid, smooth, translations):
        orbit = OrbitBasis.at(smooth, translations)
        sub = task_normal(random_field(grid, 0), orbit, gram(orbit), 0.1, 2.0)
        assert norm(sub.nhat) == pytest.approx(1.0, abs=1e-12)
        for e in orbit.e:
            assert abs(float(inner_product(sub.nhat, e))) <= 1e-10 * norm(e)
        assert reachability(sub.nhat, orbit) > 0


def test_descent_bound_slack_for_quadratic(grid, smooth):
    task = SyntheticTask("SmoothQuadratic", 2.0)
    g = -2 * smooth
    r = random_field(grid, 1, amplitude=0.1)
    slack = eval_F(task, smooth + r) - descent_bound(task, smooth, g, r)
    assert slack == pytest.approx(-2 * norm(r) ** 2, rel=1e-9)


class TestPureDescent:

    @pytest.mark.parametrize("seed", [0, 1])
    def test_minimized_direction_is_normal(self, grid32, translations, seed):
        S = smooth_signal(grid32, 0.5, 3, seed)
        task = make_task(TaskConfig(), S, seed)
        out = pure_descent(S, task, translations, EnergyConfig(), OptConfig(seed=seed), 1.0)
        assert out.reason == ""
        assert out.leakage <= 0.1

    def test_orbit_step_along_band(self, grid, smooth, translations):
        task = SyntheticTask("NormBand", 1.05 * float(inner_product(smooth, smooth)))
        F0 = eval_F(task, smooth)
        out = pure_descent(smooth, task, translations, EnergyConfig(), OptConfig(), 1.0,
                           phi=MultiField.constant(grid, [1.0, 0.0]))
        # h is a unit orbit direction and ⟨S, h⟩ = 0, so F(S ± t·h) = F(S) − t²
        assert len(out.rungs) == 5 and [rung[0] for rung in out.rungs] == [1.0, 0.5, 0.25, 0.125, 0.0625]
        assert out.crossed and out.sign == 1 and out.t == 0.25
        assert out.dW == -1.0
        assert out.F_after == pytest.approx(F0 - 0.0625, abs=1e-10)
        assert out.leakage == pytest.approx(1.0, abs=1e-10)

    def test_whole_cell_translations_do_not_cross(self, grid, smooth, translations):
        task = SyntheticTask("NormBand", 1.05 * float(inner_product(smooth, smooth)))
        phi = MultiField.constant(grid, [grid.nx * grid.hx, 0.0])
        out = pure_descent(smooth, task, translations, EnergyConfig(), OptConfig(), 1.0, phi=phi, deform="warp")
        assert not out.crossed and out.dW == 0 and out.sign == 0
        assert all(sign == 0 for _, sign, _ in out.rungs)

    def test_degenerate_direction(self, grid, smooth, translations):
        task = SyntheticTask("NormBand", 1.0)
        out = pure_descent(smooth, task, translations, EnergyConfig(), OptConfig(), 1.0, phi=MultiField.zeros(grid, 2))
        assert not out.crossed and out.reason == "degenerate-h"

    def test_invalid_deform(self, smooth, translations):
        with pytest.raises(ConfigError):
            pure_descent(smooth, SyntheticTask("NormBand", 1.0), translations, EnergyConfig(), OptConfig(), 1.0,
                         deform="rotate")


class TestWeakDescent:

    def test_already_inside(self, smooth, translations):
        task = SyntheticTask("SmoothQuadratic", 0.0)
        out = weak_descent(smooth, task, translations, EnergyConfig(), WeakConfig(), OptConfig())
        assert out.crossed and out.certified and out.reason == "already-inside"

    @pytest.mark.slow
    def test_smooth_quadratic_crosses(self):
        engine = DescentEngine(grid=Grid(16, 16), mc=MCConfig(seeds=20), weak=WeakConfig(substeps=4),
                               opt=OptConfig(max_iters=200))
        records = engine.run("weak", use_tqdm=False)
        assert [r["seed"] for r in records] == list(range(20))
        assert sum(r["crossed"] for r in records) >= 19
        assert all(r["residuals"]["lemma_slack"] <= 1e-8 for r in records)


def test_slice_crossing_matches_cap_law(smooth, translations):
    slc = slice_crossing(smooth, translations, 10, 0.3, 2000, seed=0)
    assert slc.m0 == 8
    assert slc.tau0 == pytest.approx(0.3, rel=1e-10)
    assert slc.agrees


def test_slice_crossing_needs_room(smooth, translations):
    with pytest.raises(ConfigError):
        slice_crossing(smooth, translations, 2, 0.3, 10, seed=0)


def test_signed_rank_summary():
    s = signed_rank_summary([-1.0, -2.0, -3.0, -0.5, -4.0, -1.5, -2.5, -3.5, 0.0])
    assert s["n"] == 9 and s["nonzero"] == 8
    assert s["pvalue"] < 0.01 and s["median"] < 0
    empty = signed_rank_summary([0.0, 0.0])
    assert empty["pvalue"] == 1.0 and empty["nonzero"] == 0


def test_engine_rejects_unknown_mode():
    with pytest.raises(ConfigError):
        DescentEngine().run("sideways", seeds=[0], use_tqdm=False)
