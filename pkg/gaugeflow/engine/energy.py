import logging
import math
from dataclasses import replace

import torch

from gaugeflow.config import EnergyConfig, WeakConfig
from gaugeflow.errors import ConfigError, NumericError
from gaugeflow.geometry.fields import MultiField, ScalarField, dirichlet, inner_product, laplacian, norm
from gaugeflow.geometry.lieflow import FlowConfig, GeneratorBasis, assemble, linearized_residual, warp
from gaugeflow.geometry.orbit import OrbitBasis, data_b, gram, project

logger = logging.getLogger(__name__)


def residual(S: ScalarField, basis: GeneratorBasis, phi: MultiField, cfg: EnergyConfig) -> ScalarField:
    if cfg.flow == "linearized":
        return cfg.t * linearized_residual(S, basis, phi)
    return warp(S, assemble(basis, phi), cfg.flow_config) - S


def _regularizer(phi: MultiField, cfg: EnergyConfig) -> torch.Tensor:
    well = phi.square_norm().values - cfg.v**2
    return cfg.alpha * dirichlet(phi) + cfg.beta * (well**2).sum() * phi.grid.measure


def data_term(S: ScalarField, basis: GeneratorBasis, r: ScalarField, variant: str) -> torch.Tensor:
    if variant == "a":
        return inner_product(r, r)
    orbit = OrbitBasis.at(S, basis)
    return data_b(r, orbit, gram(orbit))


def _energy(S, basis, phi, cfg) -> torch.Tensor:
    r = residual(S, basis, phi, cfg)
    return data_term(S, basis, r, cfg.variant) + _regularizer(phi, cfg)


def energy(S: ScalarField, basis: GeneratorBasis, phi: MultiField, cfg: EnergyConfig) -> float:
    E = float(_energy(S, basis, phi, cfg))
    if not math.isfinite(E):
        raise NumericError(f"energy is not finite ({E})")
    return E


def _autograd(fn, phi: MultiField) -> MultiField:
    values = phi.values.detach().clone().requires_grad_(True)
    E = fn(MultiField(phi.grid, values))
    (dE,) = torch.autograd.grad(E, values)
    # Euclidean gradient over node values → L² gradient
    return MultiField(phi.grid, dE / phi.grid.measure)


def fd_gradient(fn, phi: MultiField, h: float | None = None) -> MultiField:
    """Per-node central differences of fn(φ), returned as an L² gradient."""
    if h is None:
        h = 1e-4 * (1 + float(phi.values.abs().max()))
    if phi.grid.size > 256:
        logger.warning("finite-difference gradient on a %d-node grid needs %d energy evaluations",
                       phi.grid.size, 2 * phi.values.numel())
    base = phi.values.detach()
    flat = base.flatten()
    out = torch.empty_like(flat)
    for k in range(flat.numel()):
        bump = torch.zeros_like(flat)
        bump[k] = h
        plus = float(fn(MultiField(phi.grid, (flat + bump).view_as(base))))
        minus = float(fn(MultiField(phi.grid, (flat - bump).view_as(base))))
        out[k] = (plus - minus) / (2 * h)
    return MultiField(phi.grid, out.view_as(base) / phi.grid.measure)


def grad_energy(S: ScalarField, basis: GeneratorBasis, phi: MultiField, cfg: EnergyConfig) -> MultiField:
    """L² gradient of the gauge energy: ⟨grad_energy, δφ⟩ is its first variation along δφ."""
    if cfg.flow == "nonlinear":
        fn = lambda p: _energy(S, basis, p, cfg)
        return _autograd(fn, phi) if cfg.grad_mode == "autograd" else fd_gradient(fn, phi)
    orbit = OrbitBasis.at(S, basis)
    r = cfg.t * linearized_residual(S, basis, phi)
    if cfg.variant == "b":
        r, _ = project(r, orbit, gram(orbit))
    data = 2 * cfg.t * orbit.values * r.values
    well = phi.square_norm().values - cfg.v**2
    g = data + 2 * cfg.alpha * laplacian(phi).values + 4 * cfg.beta * well * phi.values
    return MultiField(phi.grid, g)


def constraint_residual(S: ScalarField, basis: GeneratorBasis, phi: MultiField, cfg: EnergyConfig) -> torch.Tensor:
    """Component i: t⟨e_i, r⟩ + 2β⟨|φ|²−v², φ_i⟩, the pairing of ½·grad_energy with constant variations."""
    orbit = OrbitBasis.at(S, basis)
    r = residual(S, basis, phi, cfg)
    well = phi.square_norm().values - cfg.v**2
    m = phi.grid.measure
    data = (orbit.values * r.values).flatten(1).sum(1) * m
    return (cfg.t * data + 2 * cfg.beta * (well * phi.values).flatten(1).sum(1) * m).detach()


def constraint_scale(S: ScalarField, basis: GeneratorBasis, phi: MultiField, cfg: EnergyConfig) -> float:
    """max_i |t|·‖e_i‖·‖r‖, the Cauchy–Schwarz size of the data pairing in constraint_residual."""
    orbit = OrbitBasis.at(S, basis)
    with torch.no_grad():
        r = residual(S, basis, phi, cfg)
    return abs(cfg.t) * max(norm(e) for e in orbit.e) * norm(r)


def _check_normal(wcfg: WeakConfig):
    if wcfg.nhat is None:
        raise ConfigError("weak energy needs a task normal nhat")
    if abs(norm(wcfg.nhat) - 1.0) > 1e-10:
        raise ConfigError(f"nhat must have unit L2 norm, got {norm(wcfg.nhat)}")


def weak_terms(S: ScalarField, basis: GeneratorBasis, a, phi: MultiField, cfg: EnergyConfig,
               wcfg: WeakConfig) -> dict[str, torch.Tensor]:
    """Pieces of the weakly coupled energy; `total` is their weighted sum."""
    _check_normal(wcfg)
    cfg = replace(cfg, variant="b")
    r = warp(S, assemble(basis, phi), FlowConfig(a, wcfg.substeps)) - S
    orbit = OrbitBasis.at(S, basis)
    leak = data_b(r, orbit, gram(orbit))
    geometric = leak + _regularizer(phi, cfg)
    hit = inner_product(wcfg.nhat, r)
    rr = inner_product(r, r)
    total = (geometric + wcfg.lam * (hit - wcfg.eps_star) ** 2 + wcfg.eta * (rr - hit**2)
             + wcfg.mu_leak * leak)
    return {"total": total, "geometric": geometric, "hit": hit, "r_norm_sq": rr, "leak_sq": leak, "r": r}


def weak_energy(S: ScalarField, basis: GeneratorBasis, a: float, phi: MultiField, cfg: EnergyConfig,
                wcfg: WeakConfig) -> float:
    E = float(weak_terms(S, basis, a, phi, cfg, wcfg)["total"])
    if not math.isfinite(E):
        raise NumericError(f"weak energy is not finite ({E})")
    return E


def weak_value_and_grad(S, basis, a: float, phi: MultiField, cfg: EnergyConfig,
                        wcfg: WeakConfig) -> tuple[float, float, MultiField]:
    at = torch.tensor(float(a), dtype=phi.values.dtype, requires_grad=True)
    values = phi.values.detach().clone().requires_grad_(True)
    E = weak_terms(S, basis, at, MultiField(phi.grid, values), cfg, wcfg)["total"]
    da, dphi = torch.autograd.grad(E, (at, values))
    return float(E), float(da), MultiField(phi.grid, dphi / phi.grid.measure)


def grad_weak(S: ScalarField, basis: GeneratorBasis, a: float, phi: MultiField, cfg: EnergyConfig,
              wcfg: WeakConfig) -> tuple[float, MultiField]:
    """(∂E/∂a, L² gradient in φ) of the weak energy."""
    if cfg.grad_mode == "autograd":
        _, da, dphi = weak_value_and_grad(S, basis, a, phi, cfg, wcfg)
        return da, dphi
    h = 1e-4 * (1 + abs(float(a)))
    fa = lambda x: weak_energy(S, basis, x, phi, cfg, wcfg)
    da = (fa(a + h) - fa(a - h)) / (2 * h)
    dphi = fd_gradient(lambda p: weak_terms(S, basis, a, p, cfg, wcfg)["total"], phi)
    return da, dphi
