import time

from gaugeflow import GeneratorBasis, Grid
from gaugeflow.config import EnergyConfig, OptConfig
from gaugeflow.engine.optimizer import minimize
from gaugeflow.geometry.fields import MultiField
from gaugeflow.geometry.lieflow import FlowConfig, assemble, warp
from gaugeflow.stats.sampling import field_noise
from gaugeflow.tasks.synthetic import smooth_signal


def main():
    grid = Grid(128, 128)
    num_warps = 64
    basis = GeneratorBasis.from_kinds("TranslateX", "TranslateY", "Rotate")

    S = smooth_signal(grid, 0.5, 3, seed=0)
    phi = MultiField(grid, field_noise((len(basis), *grid.shape), 0.2, seed=0))
    X = assemble(basis, phi)
    cfg = FlowConfig(1.0, substeps=8)

    warp(S, X, cfg)
    t = time.time()
    for _ in range(num_warps):
        warp(S, X, cfg)
    t = (time.time() - t)
    nodes = num_warps * grid.size
    print(f"Warp: {num_warps}x{grid.size} nodes, Time: {t:.2f}s, Throughput: {nodes / t:.2f}nodes/s")

    ocfg = OptConfig(max_iters=200, use_tqdm=False)
    t = time.time()
    _, trace = minimize(S, basis, None, EnergyConfig(flow="nonlinear"), ocfg)
    t = (time.time() - t)
    print(f"Minimize: {trace.iterations} iters ({trace.status.name}), Time: {t:.2f}s, {trace.iterations / t:.2f}it/s")


if __name__ == "__main__":
    main()
