from gaugeflow import GaugeDescent, Grid, RunConfig, TaskConfig
from gaugeflow.config import MCConfig


def main():
    config = RunConfig(
        grid=Grid(32, 32),
        basis=["TranslateX", "TranslateY"],
        task=TaskConfig(kind="SmoothQuadratic", gap=0.05),
        mc=MCConfig(seeds=4),
    )
    engine = GaugeDescent(config)

    for mode in ("pure", "weak"):
        outputs = engine.run(mode)
        for record in outputs:
            print("\n")
            print(f"Mode: {mode!r}, seed: {record['seed']}")
            print(f"F: {record['F_before']:.4e} -> {record['F_after']:.4e}, crossed: {record['crossed']}")


if __name__ == "__main__":
    main()
