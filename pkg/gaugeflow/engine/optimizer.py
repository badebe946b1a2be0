import copy
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch
from tqdm.auto import tqdm

from gaugeflow.config import EnergyConfig, OptConfig, WeakConfig
from gaugeflow.engine.energy import energy, grad_energy, weak_terms, weak_value_and_grad
from gaugeflow.engine.trace import Trace, TraceStatus
from gaugeflow.errors import ConfigError, NumericError
from gaugeflow.geometry.fields import MultiField, ScalarField, norm
from gaugeflow.geometry.lieflow import GeneratorBasis
from gaugeflow.geometry.orbit import OrbitBasis, gram, project
from gaugeflow.stats.sampling import field_noise, sample_sphere

logger = logging.getLogger(__name__)


class AdamBacktracking:
    """torch.optim.Adam on a flat parameter tensor, guarded by a line search. A step that raises
    the objective is undone and retried at half the learning rate, up to max_halvings times; a
    step accepted at the first try doubles the rate again, capped at `step`, unless `regrow` is
    off. When the halvings are exhausted the moments are reset once, and a second failure stops
    the run."""

    def __init__(self, ocfg: OptConfig, regrow: bool = True):
        self.ocfg = ocfg
        self.regrow = regrow

    def run(self, x0: torch.Tensor, value_and_grad: Callable, value: Callable | None = None, label: str = ""):
        """Without `value`, trial points go through value_and_grad and an accepted one keeps its gradient."""
        c = self.ocfg
        x = x0.detach().clone().requires_grad_(True)
        E, g = value_and_grad(x.detach())
        g0 = float(g.norm())
        trace = Trace(E, g0, label)
        if not math.isfinite(E):
            raise NumericError(f"{label or 'objective'} is not finite at the starting point")
        if g0 == 0.0:
            trace.finish(TraceStatus.CONVERGED)
            return x.detach(), trace
        lr = c.step
        optimizer = torch.optim.Adam([x], lr=lr, betas=(c.beta1, c.beta2), eps=c.eps)
        reset = False
        pbar = tqdm(total=c.max_iters, desc=label or "Minimizing", dynamic_ncols=True) if c.use_tqdm else None
        for _ in range(c.max_iters):
            x.grad = g.detach().clone()
            x_prev = x.detach().clone()
            state = copy.deepcopy(optimizer.state_dict())
            for halvings in range(c.max_halvings + 1):
                optimizer.param_groups[0]["lr"] = lr
                optimizer.step()
                if value is None:
                    E_new, g_new = value_and_grad(x.detach())
                else:
                    E_new, g_new = value(x.detach()), None
                if math.isfinite(E_new) and E_new <= E:
                    break
                lr *= 0.5
                # undo the step and its moment update
                with torch.no_grad():
                    x.copy_(x_prev)
                optimizer.load_state_dict(copy.deepcopy(state))
            else:
                if reset:
                    trace.finish(TraceStatus.STALLED)
                    break
                logger.debug("%s: backtracking exhausted at lr=%.3g, resetting moments", label, lr)
                optimizer.state.clear()
                lr = c.step
                reset = True
                trace.append(E, float(g.norm()), 0.0)
                continue
            reset = False
            E, g = (E_new, g_new) if g_new is not None else value_and_grad(x.detach())
            gn = float(g.norm())
            trace.append(E, gn, lr)
            if self.regrow and halvings == 0:
                lr = min(2 * lr, c.step)
            if pbar is not None:
                pbar.set_postfix({"energy": f"{E:.3e}", "grad": f"{gn:.2e}"})
                pbar.update(1)
            if gn <= c.grad_tol * g0:
                trace.finish(TraceStatus.CONVERGED)
                break
        if pbar is not None:
            pbar.close()
        if not trace.is_finished:
            trace.finish(TraceStatus.MAX_ITERS)
        logger.info("%s: %s after %d iterations, energy %.6g -> %.6g", label, trace.status.name,
                    trace.iterations, trace.energy0, E)
        return x.detach(), trace


def seed_field(grid, channels: int, v: float, seed: int) -> MultiField:
    """Uniform noise of amplitude 0.1·v, away from the φ = 0 critical point."""
    return MultiField(grid, field_noise((channels, *grid.shape), 0.1 * v, seed, "phi0"))


def minimize(S: ScalarField, basis: GeneratorBasis, phi0: MultiField | None, cfg: EnergyConfig,
             ocfg: OptConfig) -> tuple[MultiField, Trace]:
    if phi0 is None:
        phi0 = seed_field(S.grid, len(basis), cfg.v, ocfg.seed)
    grid, shape, mu = phi0.grid, phi0.values.shape, phi0.grid.measure

    def value(x):
        return energy(S, basis, MultiField(grid, x.view(shape)), cfg)

    def value_and_grad(x):
        phi = MultiField(grid, x.view(shape))
        # Euclidean gradient in node values
        return energy(S, basis, phi, cfg), grad_energy(S, basis, phi, cfg).values.flatten() * mu

    x, trace = AdamBacktracking(ocfg).run(phi0.values.flatten(), value_and_grad, value, "energy")
    return MultiField(grid, x.view(shape)), trace


def reachability_seed(S: ScalarField, basis: GeneratorBasis, wcfg: WeakConfig, cfg: EnergyConfig,
                      seed: int) -> MultiField:
    """φ_i = n̂·e_i pointwise plus small noise, scaled to max |φ| ≈ v. Then Σφ_i e_i = n̂·|e|²,
    which has a positive component along n̂ wherever the orbit directions do not vanish."""
    orbit = OrbitBasis.at(S, basis)
    phi = wcfg.nhat.values * orbit.values
    scale = float(phi.abs().max())
    phi = phi * (cfg.v / scale) if scale > 0 else phi
    return MultiField(S.grid, phi + field_noise(phi.shape, 0.1 * cfg.v, seed, "phi0-weak"))


def minimize_weak(S: ScalarField, basis: GeneratorBasis, a0: float, phi0: MultiField | None,
                  cfg: EnergyConfig, wcfg: WeakConfig, ocfg: OptConfig) -> tuple[float, MultiField, Trace]:
    if phi0 is None:
        phi0 = reachability_seed(S, basis, wcfg, cfg, ocfg.seed)
    grid, shape, mu = phi0.grid, phi0.values.shape, phi0.grid.measure

    def split(x):
        return float(x[0]), MultiField(grid, x[1:].view(shape))

    def value_and_grad(x):
        a, phi = split(x)
        E, da, dphi = weak_value_and_grad(S, basis, a, phi, cfg, wcfg)
        return E, torch.cat([torch.tensor([da], dtype=x.dtype), dphi.values.flatten() * mu])

    x0 = torch.cat([torch.tensor([float(a0)], dtype=torch.float64), phi0.values.flatten()])
    # the backtracked rate only shrinks on the coupled energy
    x, trace = AdamBacktracking(ocfg, regrow=False).run(x0, value_and_grad, label="weak energy")
    a, phi = split(x)
    with torch.no_grad():
        terms = weak_terms(S, basis, a, phi, cfg, wcfg)
        orbit = OrbitBasis.at(S, basis)
        tangent, _ = project(terms["r"], orbit, gram(orbit))
    trace.extras.update({
        "hit": float(terms["hit"]),
        "leak_norm": norm(tangent),
        "r_norm": math.sqrt(max(float(terms["r_norm_sq"]), 0.0)),
        "a": a,
    })
    return a, phi, trace


@dataclass
class ConstantProbe:
    min_grad_norm: float
    flag: str  # "generic" | "stabilizer" | "constant-field"
    rank: int
    best_constant: list[float]


def constant_probe(S: ScalarField, basis: GeneratorBasis, cfg: EnergyConfig, samples: int,
                   rng: np.random.Generator, mask: torch.Tensor | None = None) -> ConstantProbe:
    """Smallest ‖grad_energy‖ over constants φ ≡ c with |c| = v, and which hypothesis of the
    no-constant-minimizer argument fails, if any. `mask` restricts the constant-e test."""
    d = len(basis)
    orbit = OrbitBasis.at(S, basis)
    rank = gram(orbit).rank
    e = orbit.values
    if mask is not None:
        e = e[:, mask]
    else:
        e = e.flatten(1)
    scale = float(e.abs().max())
    if rank < d or scale == 0.0:
        flag = "stabilizer"
    elif float((e - e.mean(1, keepdim=True)).abs().max()) <= 1e-8 * scale:
        flag = "constant-field"
    else:
        flag = "generic"
    cs = cfg.v * sample_sphere(d, rng, samples)
    best, best_c = math.inf, None
    for c in cs:
        gn = norm(grad_energy(S, basis, MultiField.constant(S.grid, c), cfg))
        if gn < best:
            best, best_c = gn, c.tolist()
    return ConstantProbe(best, flag, rank, best_c)


def sign_test(S: ScalarField, h: ScalarField, t: float, cost: Callable[[ScalarField], float]) -> tuple[int, float]:
    """argmin over {S, S + t·h, S − t·h}; ties go to no deformation, then to +1."""
    if t <= 0:
        raise ConfigError("sign test needs t > 0")
    return pick_sign(cost(S), cost(S + t * h), cost(S - t * h))


def pick_sign(c0: float, c_plus: float, c_minus: float) -> tuple[int, float]:
    choice, best = 0, c0
    for sign, c in ((+1, c_plus), (-1, c_minus)):
        if c < best:
            choice, best = sign, c
    return choice, best
