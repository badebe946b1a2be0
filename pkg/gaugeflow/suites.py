import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from gaugeflow.config import RunConfig
from gaugeflow.engine.descent_engine import DescentEngine
from gaugeflow.engine.energy import constraint_residual, constraint_scale, energy, grad_energy
from gaugeflow.engine.optimizer import constant_probe, minimize, pick_sign
from gaugeflow.geometry.fields import MultiField, ScalarField, inner_product, shift
from gaugeflow.geometry.lieflow import GeneratorBasis
from gaugeflow.stats.crossing import (CapQuery, CrossingSetup, NormalVector, cap_probability, cos_threshold,
                                      dimension_drop, mc_cap, miss_ratio, projection_law_check, projection_tail,
                                      slice_vs_random)
from gaugeflow.stats.sampling import field_noise, stream
from gaugeflow.tasks.descent import pure_descent, signed_rank_summary, slice_crossing, weak_descent
from gaugeflow.tasks.synthetic import eval_W, invariance_audit, make_task, smooth_signal
from gaugeflow.utils.io import trace_table

logger = logging.getLogger(__name__)

CAP_HEADER = ["m", "m0", "tau", "formula_p", "mc_p", "sigma"]


@dataclass
class SuiteResult:
    name: str
    checks: dict[str, bool] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    tables: dict[str, list[list]] = field(default_factory=dict)  # CSV file name -> rows, header first
    records: dict[str, list[dict]] = field(default_factory=dict)  # JSONL file name -> records
    fields: dict[str, MultiField] = field(default_factory=dict)  # field file name -> field

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def check(self, name: str, ok) -> bool:
        ok = bool(ok)
        self.checks[name] = ok
        if not ok:
            logger.warning("%s: check failed: %s", self.name, name)
        return ok


def run_cap(config: RunConfig) -> SuiteResult:
    res = SuiteResult("cap")
    N, chunk = config.mc.N, config.mc.chunk
    rows = [CAP_HEADER]
    table = {}
    for m in config.cap.ms:
        n = NormalVector(np.eye(m)[0])
        for tau in config.cap.taus:
            p = cap_probability(CapQuery(m, tau))
            mc_p, sigma = mc_cap(n, CrossingSetup(tau, 1.0, 1.0), m, N, config.seed, chunk)
            rows.append([m, m, tau, p, mc_p, sigma])
            table[m, tau] = p
            tol = 4 * max(math.sqrt(p * (1 - p) / N), 1 / N)
            res.check(f"mc m={m} tau={tau}", abs(mc_p - p) <= tol)
            if m == 2:
                res.check(f"closed form m=2 tau={tau}", abs(p - 2 / math.pi * math.acos(min(tau, 1.0))) <= 1e-10)
            elif m == 3:
                res.check(f"closed form m=3 tau={tau}", abs(p - max(1 - tau, 0.0)) <= 1e-10)
    ms, taus = sorted(set(config.cap.ms)), sorted(set(config.cap.taus))
    res.check("monotone in tau", all(table[m, a] >= table[m, b] for m in ms for a, b in zip(taus, taus[1:])))
    res.check("monotone in m", all(table[a, tau] >= table[b, tau] for tau in taus for a, b in zip(ms, ms[1:])))
    # the same draws against two orthogonal normals
    m, tau = ms[-1], taus[len(taus) // 2]
    setup = CrossingSetup(tau, 1.0, 1.0)
    p1, s1 = mc_cap(NormalVector(np.eye(m)[0]), setup, m, N, config.seed, chunk)
    p2, s2 = mc_cap(NormalVector(np.eye(m)[1]), setup, m, N, config.seed, chunk)
    res.check("rotational invariance", abs(p1 - p2) <= 4 * math.hypot(s1, s2) + 1e-12)
    res.tables["cap.csv"] = rows
    res.summary = {"queries": len(rows) - 1, "N": N}
    return res


def run_grassmann(config: RunConfig) -> SuiteResult:
    res = SuiteResult("grassmann-check")
    g = config.grassmann
    rows = [CAP_HEADER]
    laws = []
    for m, m0 in g.pairs:
        law = projection_law_check(m, m0, g.N, config.seed) if m0 < m else None
        if law is not None:
            laws.append({"m": m, "m0": m0, "mean": law.mean, "mean_expected": law.mean_expected,
                         "var": law.var, "var_expected": law.var_expected,
                         "ks_stat": law.ks_stat, "ks_pvalue": law.ks_pvalue, "passes": law.passes})
            res.check(f"projection law m={m} m0={m0}", law.passes)
        for cos_theta in (1.0, math.sqrt(m0 / m)):
            report = slice_vs_random(m, m0, cos_theta, g.tau_u, config.mc.trials, config.seed)
            rows.append([m, m0, g.tau_u, report.p_slice, report.p_random, report.sigma_random])
            if m0 == m:
                continue
            if cos_theta == 1.0:
                res.check(f"slice dominates m={m} m0={m0}", report.p_slice > report.p_random)
            else:
                res.check(f"boundary band m={m} m0={m0}", report.near_boundary)
        res.check(f"dimension drop m={m} m0={m0}", abs(dimension_drop(m, m0) - cos_threshold(m, m0)) <= 1e-10)
        # first-order miss ratio of a slice along the normal against the full space
        miss0 = 1 - cap_probability(CapQuery(m0, g.tau_u))
        miss = 1 - cap_probability(CapQuery(m, g.tau_u))
        res.check(f"miss ratio m={m} m0={m0}", abs(miss0 / miss / miss_ratio(m, m0, 1.0) - 1) <= 1e-3)
    flagged = slice_vs_random(100, 90, 0.1, g.tau_u, config.mc.trials, config.seed)
    res.check("steep slice flagged", not flagged.holds)
    tails = [projection_tail(m, m // 4, g.eps, g.N, config.seed) for m in g.tail_ms]
    res.check("tail decays in m", all(a > b for a, b in zip(tails, tails[1:])))
    res.tables["grassmann.csv"] = rows
    res.summary = {"projection_law": laws, "tail": dict(zip(map(str, g.tail_ms), tails))}
    return res


def _fd_probes(S, basis, phi: MultiField, cfg, probes: int, seed: int, h: float) -> float:
    """Largest gap between the directional central difference of the energy and ⟨grad, δ⟩, over 1 + |E|."""
    g = grad_energy(S, basis, phi, cfg)
    scale = 1 + abs(energy(S, basis, phi, cfg))
    worst = 0.0
    for k in range(probes):
        delta = MultiField(phi.grid, field_noise(tuple(phi.values.shape), 1.0, seed + k, "fd-probe"))
        fd = (energy(S, basis, phi + delta * h, cfg) - energy(S, basis, phi - delta * h, cfg)) / (2 * h)
        an = float(inner_product(g, delta))
        worst = max(worst, abs(fd - an) / scale)
    return worst


def run_energy_min(config: RunConfig) -> SuiteResult:
    res = SuiteResult("energy-min")
    basis = GeneratorBasis.from_tags(config.basis, config.grid)
    S = smooth_signal(config.grid, config.task.amplitude, config.task.modes, config.seed)
    cfg = config.energy
    phi, trace = minimize(S, basis, None, cfg, replace(config.opt, seed=config.seed))
    constraint = constraint_residual(S, basis, phi, cfg)
    scale = max(constraint_scale(S, basis, phi, cfg), 1e-12)
    rel = float(constraint.abs().max()) / scale
    lin = _fd_probes(S, basis, phi, replace(cfg, flow="linearized"), 20, config.seed, 1e-5)
    nonlin = _fd_probes(S, basis, phi, replace(cfg, flow="nonlinear"), 20, config.seed, 1e-9)
    res.check("best iterate", energy(S, basis, phi, cfg) <= trace.energy0)
    res.check("constraint residual", rel <= 1e-3)
    res.check("linearized gradient vs FD", lin <= 1e-6)
    res.check("nonlinear gradient vs FD", nonlin <= 1e-5)
    res.tables["energy_trace.csv"] = trace_table(trace)
    res.fields["phi.bin"] = phi
    res.summary = {
        "status": trace.status.name, "iterations": trace.iterations, "energy0": trace.energy0,
        "energy": trace.best_energy, "constraint_residual": constraint.tolist(), "constraint_scale": scale,
        "constraint_rel": rel,
        "fd_linearized": lin, "fd_nonlinear": nonlin,
    }
    return res


def run_constant_probe(config: RunConfig, samples: int = 64) -> SuiteResult:
    res = SuiteResult("lemma1-probe")
    grid, cfg = config.grid, config.energy
    rng = stream(config.seed, "constant_probe")
    S = smooth_signal(grid, config.task.amplitude, config.task.modes, config.seed)
    generic = constant_probe(S, GeneratorBasis.from_tags(config.basis, grid), cfg, samples, rng)
    floor = 1e-4 * cfg.beta * cfg.v**3
    res.check("generic floor", generic.flag == "generic" and generic.min_grad_norm >= floor)
    # S depending on x alone is fixed by vertical translations
    Sx = ScalarField.from_function(grid, lambda x, y: torch.sin(2 * math.pi * x) + 0.3 * torch.cos(4 * math.pi * x))
    stabilizer = constant_probe(Sx, GeneratorBasis.from_kinds("TranslateX", "TranslateY"), cfg, samples, rng)
    res.check("stabilizer flagged", stabilizer.flag == "stabilizer")
    # a sawtooth in x has constant orbit direction away from the wrap-around columns
    saw = ScalarField.from_function(grid, lambda x, y: x)
    mask = torch.zeros(grid.shape, dtype=torch.bool)
    mask[:, 1:-1] = True
    constant = constant_probe(saw, GeneratorBasis.from_kinds("TranslateX"), cfg, samples, rng, mask)
    res.check("constant field flagged", constant.flag == "constant-field")
    res.summary = {
        name: {"flag": p.flag, "rank": p.rank, "min_grad_norm": p.min_grad_norm, "best_constant": p.best_constant}
        for name, p in (("generic", generic), ("stabilizer", stabilizer), ("constant_field", constant))
    }
    res.summary["floor"] = floor
    return res


def run_pure_descent(config: RunConfig, use_tqdm: bool = False) -> SuiteResult:
    res = SuiteResult("pure-descent")
    engine = DescentEngine(config)
    records = engine.run("pure", use_tqdm=use_tqdm)
    res.check("one record per seed", len(records) == config.mc.seeds)
    res.check("two-valued cost", all(r["dW"] in (0.0, config.task.w0 - config.task.w1, config.task.w1 - config.task.w0)
                                     for r in records))
    res.check("tangential leakage", all(r["leakage"] <= 0.1 for r in records))
    # exact integer translations of the whole grid cannot change an invariant cost
    grid = config.grid
    S = engine.signal(config.seed)
    task = make_task(replace(config.task, kind="NormBand"), S, config.seed)
    c = 16 * grid.hx / config.task.t_max
    phi = MultiField.constant(grid, np.array([c, 0.0]))
    forced = pure_descent(S, task, GeneratorBasis.from_kinds("TranslateX", "TranslateY"), config.energy,
                          config.opt, config.task.t_max, phi=phi, deform="warp")
    res.check("orbit-only deformation does not cross", not forced.crossed and forced.dW == 0)
    m = min(8 + len(engine.basis), grid.size)
    slc = slice_crossing(S, engine.basis, m, 0.5, min(config.mc.trials, 4000), config.seed, config.task.t_max)
    res.check("slice crossing rate", slc.agrees)
    res.records["pure_descent.jsonl"] = records
    res.summary = {
        "seeds": len(records), "crossed": sum(r["crossed"] for r in records),
        "mean_leakage": float(np.mean([r["leakage"] for r in records])),
        "max_leakage": max(r["leakage"] for r in records),
        "signed_rank": signed_rank_summary([r["dW"] for r in records]),
        "slice_crossing": {"m": slc.m, "m0": slc.m0, "tau0": slc.tau0, "rate": slc.rate,
                           "predicted": slc.predicted, "sigma": slc.sigma},
    }
    return res


def run_weak_descent(config: RunConfig, use_tqdm: bool = False, lams=(1e2, 1e3, 1e4)) -> SuiteResult:
    res = SuiteResult("weak-descent")
    engine = DescentEngine(config)
    records = engine.run("weak", use_tqdm=use_tqdm)
    n = len(records)
    crossed = sum(r["crossed"] for r in records)
    res.check("one record per seed", n == config.mc.seeds)
    if config.task.kind == "SmoothQuadratic":
        res.check("success rate", crossed >= math.ceil(0.95 * n))
        res.check("descent bound", all(r["residuals"]["lemma_slack"] <= 1e-8 for r in records))
    # deviation of the boundary hit as the penalty weight grows
    S = engine.signal(config.seed)
    task = make_task(config.task, S, config.seed)
    ocfg = replace(config.opt, seed=config.seed)
    deviations = []
    for lam in lams:
        out = weak_descent(S, task, engine.basis, config.energy, replace(config.weak, lam=lam), ocfg)
        deviations.append(out.hit_deviation)
    slope = None
    if all(d > 0 for d in deviations):
        slope = float(np.polyfit(np.log(lams), np.log(deviations), 1)[0])
        res.check("penalty slope", abs(slope + 0.5) <= 0.15)
    else:
        logger.info("hit deviation vanished in the penalty sweep: %s", deviations)
    res.records["weak_descent.jsonl"] = records
    res.summary = {
        "seeds": n, "crossed": crossed, "certified": sum(r["residuals"]["certified"] for r in records),
        "lambda_sweep": {"lambda": list(lams), "deviation": deviations, "slope": slope},
        "signed_rank": signed_rank_summary([r["dW"] for r in records]),
    }
    return res


def run_audit(config: RunConfig, k_samples: int = 50) -> SuiteResult:
    res = SuiteResult("audit")
    S = smooth_signal(config.grid, config.task.amplitude, config.task.modes, config.seed)
    rows = [["kind", "max_deviation", "w_changed", "violation"]]
    for kind in ("TemplateCorr", "NormBand", "SmoothQuadratic", "LinearProbe"):
        task = make_task(replace(config.task, kind=kind), S, config.seed)
        audit = invariance_audit(task, S, k_samples, stream(config.seed, "audit", len(rows)))
        rows.append([kind, audit.max_deviation, audit.w_changed, audit.violation])
        # the probe task is not invariant by construction; the auditor must catch it
        res.check(f"audit {kind}", audit.violation if kind == "LinearProbe" else not audit.violation)
        if task.invariant:
            W = lambda s: eval_W(task, s)
            signs = [pick_sign(W(S), W(shift(S, k, 0)), W(shift(S, -k, 0)))[0] for k in (1, 3, 7)]
            res.check(f"orbit sign test {kind}", signs == [0, 0, 0])
    res.tables["audit.csv"] = rows
    res.summary = {"k_samples": k_samples}
    return res


SUITES = {
    "cap": run_cap,
    "grassmann-check": run_grassmann,
    "energy-min": run_energy_min,
    "lemma1-probe": run_constant_probe,
    "pure-descent": run_pure_descent,
    "weak-descent": run_weak_descent,
    "audit": run_audit,
}


def run_suites(config: RunConfig) -> list[SuiteResult]:
    names = list(SUITES) if config.subcommand == "validate" else [config.subcommand]
    results = []
    for name in names:
        logger.info("running suite %s", name)
        results.append(SUITES[name](config))
    return results
