import json
from dataclasses import dataclass, field, fields, replace

from gaugeflow.errors import ConfigError
from gaugeflow.geometry.fields import Grid, ScalarField, norm
from gaugeflow.geometry.lieflow import FlowConfig, GeneratorKind


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _strict(cls, data: dict, section: str):
    # unknown keys are rejected, not filtered
    known = {f.name for f in fields(cls)}
    aliases = getattr(cls, "json_aliases", {})
    kwargs = {}
    for key, value in data.items():
        name = aliases.get(key, key)
        _check(name in known, f"{section}: unknown key {key!r}")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{section}: {e}") from None


@dataclass
class EnergyConfig:
    alpha: float = 0.1  # weight of the kinetic term ‖∇φ‖²
    beta: float = 10.0  # weight of the double-well ‖|φ|²−v²‖²
    v: float = 0.2  # preferred control amplitude
    variant: str = "b"  # data term: "a" ambient misfit, "b" orbit-projected misfit
    flow: str = "linearized"  # "linearized" r = t·Σφe, "nonlinear" r = warp − S
    t: float = 1.0  # flow time
    substeps: int = 8  # RK4 substeps of the nonlinear warp
    grad_mode: str = "autograd"  # nonlinear gradients: "autograd" or per-node "fd"

    def __post_init__(self):
        _check(self.alpha >= 0, "energy.alpha must be >= 0")
        _check(self.beta > 0, "energy.beta must be > 0")
        _check(self.v > 0, "energy.v must be > 0")
        _check(self.variant in ("a", "b"), "energy.variant must be 'a' or 'b'")
        _check(self.flow in ("linearized", "nonlinear"), "energy.flow must be 'linearized' or 'nonlinear'")
        _check(self.flow == "linearized" or self.t > 0, "energy.t must be > 0 for nonlinear flow")
        _check(self.substeps >= 1, "energy.substeps must be >= 1")
        _check(self.grad_mode in ("autograd", "fd"), "energy.grad_mode must be 'autograd' or 'fd'")

    @property
    def flow_config(self) -> FlowConfig:
        return FlowConfig(self.t, self.substeps)


@dataclass
class WeakConfig:
    json_aliases = {"lambda": "lam"}

    lam: float = 1e4  # weight of the boundary-hit penalty (⟨n̂,r⟩ − ε⋆)²
    eta: float = 10.0  # weight of the in-plane alignment ‖r‖² − ⟨n̂,r⟩²
    eps_star: float = 0.0  # normal step target, usually set per sample
    a0: float = 0.0  # initial scalar gain (flow time of the coupled warp)
    mu_leak: float = 0.0  # optional extra penalty on ‖P r‖²
    substeps: int = 4  # RK4 substeps of the coupled warp
    nhat: ScalarField | None = None  # task normal, attached per sample

    def __post_init__(self):
        _check(self.lam > 0, "weak.lambda must be > 0")
        _check(self.eta >= 0, "weak.eta must be >= 0")
        _check(self.mu_leak >= 0, "weak.mu_leak must be >= 0")
        _check(self.substeps >= 1, "weak.substeps must be >= 1")
        if self.nhat is not None:
            _check(abs(norm(self.nhat) - 1.0) <= 1e-10, "weak.nhat must have unit L2 norm")

    def with_target(self, nhat: ScalarField, eps_star: float) -> "WeakConfig":
        return replace(self, nhat=nhat, eps_star=eps_star)


@dataclass
class OptConfig:
    step: float = 0.05  # initial learning rate
    max_iters: int = 500
    grad_tol: float = 1e-6  # stop when ‖grad‖ <= grad_tol·‖grad₀‖
    beta1: float = 0.9  # first-moment decay
    beta2: float = 0.999  # second-moment decay
    eps: float = 1e-8
    max_halvings: int = 20  # backtracking budget per iteration
    seed: int = 0
    use_tqdm: bool = False

    def __post_init__(self):
        _check(self.step > 0, "opt.step must be > 0")
        _check(self.max_iters >= 1, "opt.max_iters must be >= 1")
        _check(self.grad_tol >= 0, "opt.grad_tol must be >= 0")
        _check(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, "opt.beta1/beta2 must lie in [0, 1)")
        _check(self.max_halvings >= 0, "opt.max_halvings must be >= 0")


@dataclass
class TaskConfig:
    kind: str = "SmoothQuadratic"  # TemplateCorr | NormBand | SmoothQuadratic | LinearProbe
    theta: float | None = None  # threshold; None derives it per sample from `gap`
    gap: float = 0.05  # relative distance to the boundary when theta is derived
    w0: float = 0.0  # cost inside C = {F <= 0}
    w1: float = 1.0  # cost outside C
    lipschitz: float | None = None  # None uses the task default
    amplitude: float = 0.5  # RMS amplitude of the seeded synthetic signals
    modes: int = 3  # Fourier modes per seeded signal
    t_max: float = 1.0  # step budget of pure descent
    deform: str = "additive"  # pure descent candidates: "additive" S ± t·h or "warp" exp(±t·A_φ)·S

    def __post_init__(self):
        _check(self.t_max > 0, "task.t_max must be > 0")
        _check(self.deform in ("additive", "warp"), "task.deform must be 'additive' or 'warp'")
        _check(self.kind in ("TemplateCorr", "NormBand", "SmoothQuadratic", "LinearProbe"),
               f"task.kind {self.kind!r} is not a known task")
        _check(self.w0 < self.w1, "task.w0 must be < task.w1")
        _check(self.gap >= 0, "task.gap must be >= 0")
        _check(self.lipschitz is None or self.lipschitz >= 0, "task.lipschitz must be >= 0")
        _check(self.amplitude > 0 and self.modes >= 1, "task.amplitude/modes must be positive")


@dataclass
class MCConfig:
    N: int = 200_000  # Monte Carlo draws per cap query
    trials: int = 100_000  # projection draws for the slice comparison
    seeds: int = 100  # seeded descent runs
    workers: int = 4  # spawn-pool size for seeded runs
    chunk: int = 20_000  # draws per RNG stream

    def __post_init__(self):
        _check(self.N >= 1000, "mc.N must be >= 1000")
        _check(self.trials >= 1, "mc.trials must be >= 1")
        _check(self.seeds >= 1, "mc.seeds must be >= 1")
        _check(self.workers >= 1, "mc.workers must be >= 1")
        _check(self.chunk >= 1, "mc.chunk must be >= 1")


@dataclass
class CapConfig:
    ms: list[int] = field(default_factory=lambda: [2, 3, 5, 20, 100])
    taus: list[float] = field(default_factory=lambda: [0.1, 0.5, 0.9])

    def __post_init__(self):
        _check(len(self.ms) > 0 and len(self.taus) > 0, "cap.ms and cap.taus must be nonempty")
        _check(all(int(m) == m and m >= 2 for m in self.ms), "cap.ms: m >= 2 required")
        _check(all(tau >= 0 for tau in self.taus), "cap.taus must be >= 0")


@dataclass
class GrassmannConfig:
    pairs: list[list[int]] = field(default_factory=lambda: [[20, 5], [100, 90]])
    N: int = 100_000  # projection draws per pair
    tau_u: float = 1e-3  # small threshold of the slice comparison
    eps: float = 0.1  # deficit of the high-probability variant
    tail_ms: list[int] = field(default_factory=lambda: [20, 50, 100])

    def __post_init__(self):
        _check(len(self.pairs) > 0, "grassmann.pairs must be nonempty")
        for pair in self.pairs:
            _check(len(pair) == 2 and 2 <= pair[1] <= pair[0], "grassmann.pairs: 2 <= m0 <= m required")
        _check(self.N >= 1000, "grassmann.N must be >= 1000")
        _check(0 <= self.tau_u <= 0.1, "grassmann.tau_u must lie in [0, 0.1]")
        _check(0 < self.eps < 1, "grassmann.eps must lie in (0, 1)")


SUBCOMMANDS = ("cap", "grassmann-check", "energy-min", "lemma1-probe", "pure-descent",
               "weak-descent", "audit", "validate")


@dataclass
class RunConfig:
    subcommand: str = "validate"
    grid: Grid = field(default_factory=lambda: Grid(32, 32))
    basis: list[str] = field(default_factory=lambda: ["TranslateX", "TranslateY"])
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    weak: WeakConfig = field(default_factory=WeakConfig)
    opt: OptConfig = field(default_factory=OptConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    mc: MCConfig = field(default_factory=MCConfig)
    cap: CapConfig = field(default_factory=CapConfig)
    grassmann: GrassmannConfig = field(default_factory=GrassmannConfig)
    seed: int = 0
    out: str = "out"
    log_level: str = "WARNING"

    def __post_init__(self):
        _check(self.subcommand in SUBCOMMANDS, f"unknown subcommand {self.subcommand!r}")
        _check(len(self.basis) >= 1, "basis must list at least one generator")
        for tag in self.basis:
            kind = tag.split(":", 1)[0]
            _check(kind in GeneratorKind.__members__, f"basis: unknown generator kind {tag!r}")
            _check(kind != "Custom" or ":" in tag, "basis: Custom generators need a field file, 'Custom:<path>'")
        _check(self.log_level in ("DEBUG", "INFO", "WARNING", "ERROR"), "log_level must be a logging level name")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _check(isinstance(data, dict), "config root must be a JSON object")
        sections = {
            "grid": Grid, "energy": EnergyConfig, "weak": WeakConfig, "opt": OptConfig,
            "task": TaskConfig, "mc": MCConfig, "cap": CapConfig, "grassmann": GrassmannConfig,
        }
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            _check(key in known, f"unknown key {key!r}")
            if key in sections:
                _check(isinstance(value, dict), f"{key} must be a JSON object")
                value = _strict(sections[key], value, key)
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"malformed JSON in {path}: {e}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        def section(obj):
            aliases = {v: k for k, v in getattr(type(obj), "json_aliases", {}).items()}
            return {aliases.get(f.name, f.name): getattr(obj, f.name)
                    for f in fields(obj) if f.name != "nhat"}
        data = {}
        for f in fields(self):
            value = getattr(self, f.name)
            data[f.name] = section(value) if hasattr(value, "__dataclass_fields__") else value
        return data
