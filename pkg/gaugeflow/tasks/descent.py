import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch
from scipy import linalg, stats

from gaugeflow.config import EnergyConfig, OptConfig, WeakConfig
from gaugeflow.engine.energy import residual
from gaugeflow.engine.optimizer import minimize, minimize_weak, pick_sign, sign_test
from gaugeflow.errors import ConfigError
from gaugeflow.geometry.fields import MultiField, ScalarField, inner_product, norm
from gaugeflow.geometry.lieflow import FlowConfig, GeneratorBasis, assemble, warp
from gaugeflow.geometry.orbit import GramData, OrbitBasis, gram, project
from gaugeflow.stats.crossing import CapQuery, CrossingSetup, cap_probability, effective_tau
from gaugeflow.stats.sampling import sample_sphere, sample_subspace, stream
from gaugeflow.tasks.synthetic import SyntheticTask, clarke_subgradient, eval_F, eval_W

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SubgradientResult:
    g: ScalarField
    g_N: ScalarField
    nhat: ScalarField | None  # None when g_N vanishes
    Delta: float
    dN: float | None
    eps_minus: float | None  # None when the curvature-safe step is infeasible
    g_N_norm: float

    @property
    def normal_feasible(self) -> bool:
        return self.nhat is not None

    @property
    def step_feasible(self) -> bool:
        return self.eps_minus is not None


def task_normal(g: ScalarField, orbit: OrbitBasis, gdata: GramData, delta: float, lipschitz: float) -> SubgradientResult:
    """Symmetry-aware task normal n̂ = −g_N/‖g_N‖ and the step targets d_N and ε₋."""
    _, g_N = project(g, orbit, gdata)
    ng, nN = norm(g), norm(g_N)
    if ng == 0.0 or nN <= 1e-10 * ng:
        return SubgradientResult(g, g_N, None, delta, None, None, nN)
    nhat = -g_N / nN
    dN = delta / nN
    if lipschitz == 0:
        # no curvature bound: the linear step is the only target
        eps_minus = dN
    elif nN**2 >= 2 * lipschitz * delta:
        eps_minus = (nN - math.sqrt(nN**2 - 2 * lipschitz * delta)) / lipschitz
    else:
        eps_minus = None
    return SubgradientResult(g, g_N, nhat, delta, dN, eps_minus, nN)


def descent_bound(task: SyntheticTask, S: ScalarField, g: ScalarField, r: ScalarField) -> float:
    """F(S) + ⟨g, r⟩ + (L/2)‖r‖², the descent-lemma upper bound on F(S + r)."""
    return eval_F(task, S) + float(inner_product(g, r)) + 0.5 * task.L * float(inner_product(r, r))


@dataclass
class PureOutcome:
    crossed: bool
    t: float
    sign: int
    W_before: float
    W_after: float
    F_before: float
    F_after: float
    leakage: float  # ‖P h‖ for the unit deformation direction h
    reason: str = ""
    rungs: list[tuple[float, int, float]] = field(default_factory=list)

    @property
    def dW(self) -> float:
        return self.W_after - self.W_before


def pure_descent(S: ScalarField, task: SyntheticTask, basis: GeneratorBasis, cfg: EnergyConfig, ocfg: OptConfig,
                 t_max: float, phi: MultiField | None = None, deform: str = "additive") -> PureOutcome:
    """Deform S along the minimizing residual direction h and keep the best sign over the
    ladder t_max/2^k, k = 0..4. `phi` deploys a precomputed control field instead of minimizing."""
    if deform not in ("additive", "warp"):
        raise ConfigError(f"unknown deformation mode {deform!r}")
    cfg = replace(cfg, variant="b")
    if phi is None:
        phi, _ = minimize(S, basis, None, cfg, ocfg)
    W0, F0 = eval_W(task, S), eval_F(task, S)
    with torch.no_grad():
        r = residual(S, basis, phi, cfg)
    rn = norm(r)
    if rn <= 1e-14 * (1 + norm(S)):
        return PureOutcome(False, 0.0, 0, W0, W0, F0, F0, 0.0, "degenerate-h")
    h = r / rn
    orbit = OrbitBasis.at(S, basis)
    tangent, _ = project(h, orbit, gram(orbit))
    leakage = norm(tangent)
    X = assemble(basis, phi)

    def candidate(sign: int, t: float) -> ScalarField:
        if deform == "additive":
            return S + sign * t * h
        return warp(S, X, FlowConfig(sign * t, cfg.substeps))

    best = None
    rungs = []
    for k in range(5):
        t = t_max / 2**k
        if deform == "additive":
            sign, cost = sign_test(S, h, t, lambda s: eval_W(task, s))
        else:
            sign, cost = pick_sign(W0, eval_W(task, candidate(+1, t)), eval_W(task, candidate(-1, t)))
        rungs.append((t, sign, cost))
        # t decreases along the ladder, so an equal cost moves the choice to the smaller step
        if sign != 0 and (best is None or cost <= best[2]):
            best = (t, sign, cost)
    if best is None:
        return PureOutcome(False, 0.0, 0, W0, W0, F0, F0, leakage, "", rungs)
    t, sign, cost = best
    return PureOutcome(True, t, sign, W0, cost, F0, eval_F(task, candidate(sign, t)), leakage, "", rungs)


@dataclass
class WeakOutcome:
    crossed: bool
    F_before: float
    F_after: float
    eps_star: float
    hit: float = 0.0  # ⟨n̂, r⟩
    leak: float = 0.0  # ‖P r‖
    r_norm: float = 0.0
    a: float = 0.0
    lemma_slack: float = 0.0  # F(S + r) − descent bound, ≤ 0 for exact L
    certified: bool = False  # descent bound itself ≤ 0
    reachable: bool = True
    iterations: int = 0
    reason: str = ""

    @property
    def hit_deviation(self) -> float:
        return abs(self.hit - self.eps_star)


def reachability(nhat: ScalarField, orbit: OrbitBasis) -> float:
    """max_i ‖n̂·e_i‖: zero iff no control field φ gives ⟨n̂, Σφ_i e_i⟩ ≠ 0."""
    return max(float(torch.sqrt(((nhat.values * e.values) ** 2).sum() * nhat.grid.measure)) for e in orbit.e)


def weak_descent(S: ScalarField, task: SyntheticTask, basis: GeneratorBasis, cfg: EnergyConfig,
                 wcfg: WeakConfig, ocfg: OptConfig) -> WeakOutcome:
    F0 = eval_F(task, S)
    if F0 <= 0:
        return WeakOutcome(True, F0, F0, 0.0, certified=True, reason="already-inside")
    if task.kind != "SmoothQuadratic":
        logger.info("weak descent on %s is reported, not certified", task.kind)
    g, _ = clarke_subgradient(task, S)
    orbit = OrbitBasis.at(S, basis)
    sub = task_normal(g, orbit, gram(orbit), F0, task.L)
    if not sub.normal_feasible:
        return WeakOutcome(False, F0, F0, 0.0, reason="g_N vanishes")
    eps_star = sub.eps_minus if sub.step_feasible else sub.dN
    reach = reachability(sub.nhat, orbit)
    if reach <= 1e-12:
        logger.warning("task normal is unreachable by the generator basis")
    wcfg = wcfg.with_target(sub.nhat, eps_star)
    a, phi, trace = minimize_weak(S, basis, wcfg.a0, None, cfg, wcfg, ocfg)
    with torch.no_grad():
        r = warp(S, assemble(basis, phi), FlowConfig(a, wcfg.substeps)) - S
    F1 = eval_F(task, S + r)
    bound = descent_bound(task, S, g, r)
    return WeakOutcome(
        crossed=F1 <= 0, F_before=F0, F_after=F1, eps_star=eps_star,
        hit=trace.extras["hit"], leak=trace.extras["leak_norm"], r_norm=trace.extras["r_norm"], a=a,
        lemma_slack=F1 - bound, certified=bound <= 0, reachable=reach > 1e-12,
        iterations=trace.iterations, reason="" if sub.step_feasible else "eps_minus infeasible, using d_N",
    )


@dataclass
class SliceCrossing:
    m: int
    m0: int
    tau0: float
    rate: float
    sigma: float
    predicted: float

    @property
    def agrees(self) -> bool:
        return abs(self.rate - self.predicted) <= 4 * self.sigma + 1e-12


def slice_crossing(S: ScalarField, basis: GeneratorBasis, m: int, tau0: float, trials: int, seed: int,
                   t_max: float = 1.0) -> SliceCrossing:
    """Sign test along uniform directions of U0 = U ∩ N_S for a random m-dimensional U, against a
    half-space cell placed so that the effective threshold is tau0."""
    grid = S.grid
    orbit = OrbitBasis.at(S, basis)
    mu = grid.measure
    rng = stream(seed, "slice_crossing")
    # L²-orthonormal frame of U
    Q = torch.from_numpy(sample_subspace(grid.size, m, rng)) / math.sqrt(mu)
    C = (orbit.values.flatten(1) @ Q * mu).numpy()
    null = linalg.null_space(C, rcond=1e-10) if C.any() else np.eye(m)
    U0 = Q @ torch.from_numpy(null)
    m0 = U0.shape[1]
    if m0 < 1:
        raise ConfigError(f"U ∩ N_S is trivial for m={m}; use m larger than the orbit rank")
    mask = ScalarField(grid, torch.from_numpy(rng.standard_normal(grid.shape)))
    coords = (U0.T @ mask.values.flatten()) * mu
    rho = float(coords.norm()) / norm(mask)
    dist = tau0 * t_max * rho
    # F(S) = θ − ⟨mask, S⟩ = dist·‖mask‖
    theta = float(inner_product(mask, S)) + dist * norm(mask)
    task = SyntheticTask("LinearProbe", theta, mask=mask)
    tau = effective_tau(CrossingSetup(dist, t_max, rho))
    hits = 0
    directions = sample_sphere(m0, stream(seed, "slice_crossing", 1), trials)
    for u in directions:
        h = ScalarField(grid, (U0 @ torch.from_numpy(u)).view(grid.shape))
        sign, _ = sign_test(S, h, t_max, lambda s: eval_W(task, s))
        hits += sign != 0
    rate = hits / trials
    predicted = cap_probability(CapQuery(m0, tau)) if m0 >= 2 else float(tau <= 1)
    return SliceCrossing(m, m0, tau, rate, math.sqrt(max(predicted * (1 - predicted), 0.0) / trials), predicted)


def signed_rank_summary(changes: list[float]) -> dict:
    """Wilcoxon signed-rank test of per-seed changes (negative is an improvement)."""
    changes = [float(c) for c in changes]
    nonzero = [c for c in changes if c != 0]
    median = float(np.median(changes)) if changes else 0.0
    if len(nonzero) < 1:
        return {"n": len(changes), "nonzero": 0, "median": median, "statistic": 0.0, "pvalue": 1.0}
    res = stats.wilcoxon(nonzero, alternative="less")
    return {"n": len(changes), "nonzero": len(nonzero), "median": median,
            "statistic": float(res.statistic), "pvalue": float(res.pvalue)}
