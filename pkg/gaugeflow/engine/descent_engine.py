import logging
from dataclasses import fields, replace
from time import perf_counter

import torch
import torch.multiprocessing as mp
from tqdm.auto import tqdm

from gaugeflow.config import RunConfig
from gaugeflow.errors import ConfigError
from gaugeflow.geometry.fields import ScalarField
from gaugeflow.geometry.lieflow import GeneratorBasis
from gaugeflow.tasks.descent import pure_descent, weak_descent
from gaugeflow.tasks.synthetic import make_task, smooth_signal

logger = logging.getLogger(__name__)

MODES = ("pure", "weak")


def _init_worker():
    # one intra-op thread per process; the pool supplies the parallelism
    torch.set_num_threads(1)


def _run_seed(args) -> dict:
    # module level so that spawned workers can unpickle it
    config, mode, seed = args
    return DescentEngine(config).run_one(mode, seed)


class DescentEngine:

    def __init__(self, config: RunConfig | None = None, **kwargs):
        if config is None:
            config_fields = {field.name for field in fields(RunConfig)}
            config_kwargs = {k: v for k, v in kwargs.items() if k in config_fields}
            config = RunConfig(**config_kwargs)
        self.config = config
        self.basis = GeneratorBasis.from_tags(config.basis, config.grid)

    def seeds(self) -> list[int]:
        return list(range(self.config.seed, self.config.seed + self.config.mc.seeds))

    def signal(self, seed: int) -> ScalarField:
        task = self.config.task
        return smooth_signal(self.config.grid, task.amplitude, task.modes, seed)

    def run_one(self, mode: str, seed: int) -> dict:
        c = self.config
        S = self.signal(seed)
        task = make_task(c.task, S, seed)
        ocfg = replace(c.opt, seed=seed, use_tqdm=False)
        if mode == "pure":
            out = pure_descent(S, task, self.basis, c.energy, ocfg, c.task.t_max, deform=c.task.deform)
            return {
                "seed": seed, "task": task.kind, "crossed": out.crossed,
                "F_before": out.F_before, "F_after": out.F_after, "dW": out.dW,
                "t": out.t, "sign": out.sign, "leakage": out.leakage,
                "residuals": {"rungs": [list(rung) for rung in out.rungs], "reason": out.reason},
            }
        out = weak_descent(S, task, self.basis, c.energy, c.weak, ocfg)
        W_before = task.w0 if out.F_before <= 0 else task.w1
        W_after = task.w0 if out.F_after <= 0 else task.w1
        return {
            "seed": seed, "task": task.kind, "crossed": out.crossed,
            "F_before": out.F_before, "F_after": out.F_after, "dW": W_after - W_before,
            "t": out.a, "sign": 1 if out.a >= 0 else -1, "leakage": out.leak,
            "residuals": {
                "eps_star": out.eps_star, "hit": out.hit, "hit_deviation": out.hit_deviation,
                "r_norm": out.r_norm, "lemma_slack": out.lemma_slack, "certified": out.certified,
                "reachable": out.reachable, "iterations": out.iterations, "reason": out.reason,
            },
        }

    def run(self, mode: str, seeds: list[int] | None = None, use_tqdm: bool = True) -> list[dict]:
        """One outcome record per seed, in seed order, independent of the worker count."""
        if mode not in MODES:
            raise ConfigError(f"unknown descent mode {mode!r}")
        seeds = self.seeds() if seeds is None else list(seeds)
        workers = min(self.config.mc.workers, len(seeds))
        if use_tqdm:
            pbar = tqdm(total=len(seeds), desc=f"{mode} descent", dynamic_ncols=True)
        outputs = []
        crossed = 0
        t = perf_counter()
        if workers > 1:
            ctx = mp.get_context("spawn")
            with ctx.Pool(workers, initializer=_init_worker) as pool:
                results = pool.imap(_run_seed, [(self.config, mode, seed) for seed in seeds])
                for record in results:
                    outputs.append(record)
                    crossed += record["crossed"]
                    if use_tqdm:
                        pbar.set_postfix({"crossed": f"{crossed}/{len(outputs)}"})
                        pbar.update(1)
        else:
            for seed in seeds:
                record = self.run_one(mode, seed)
                outputs.append(record)
                crossed += record["crossed"]
                if use_tqdm:
                    pbar.set_postfix({"crossed": f"{crossed}/{len(outputs)}"})
                    pbar.update(1)
        if use_tqdm:
            pbar.close()
        logger.info("%s descent: %d/%d seeds crossed in %.1fs", mode, crossed, len(seeds), perf_counter() - t)
        return outputs
