import math
from dataclasses import dataclass
from enum import Enum, auto

import torch

from gaugeflow.errors import ConfigError, ConformabilityError
from gaugeflow.geometry.fields import Grid, MultiField, ScalarField, VectorField, grad


class GeneratorKind(Enum):
    TranslateX = auto()
    TranslateY = auto()
    Rotate = auto()
    Dilate = auto()
    ShearX = auto()
    Custom = auto()


APPROXIMATE = (GeneratorKind.Rotate, GeneratorKind.Dilate, GeneratorKind.ShearX)


@dataclass(frozen=True, eq=False)
class Generator:
    kind: GeneratorKind
    field: VectorField | None = None  # only for Custom

    def __post_init__(self):
        if (self.kind == GeneratorKind.Custom) != (self.field is not None):
            raise ConfigError("a vector field is required for Custom generators and only for them")

    @property
    def approximate_symmetry(self) -> bool:
        # centered at (0.5, 0.5), not isometries of the torus
        return self.kind in APPROXIMATE


@dataclass(frozen=True)
class FlowConfig:
    t: float | torch.Tensor  # flow time; a 0-d tensor keeps the warp differentiable in t
    substeps: int = 8

    def __post_init__(self):
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1")
        if not math.isfinite(float(torch.as_tensor(self.t).detach())):
            raise ConfigError("flow time must be finite")


def generator_field(g: Generator, grid: Grid) -> VectorField:
    if g.kind == GeneratorKind.Custom:
        if g.field.grid != grid:
            raise ConformabilityError(f"custom generator lives on {g.field.grid}, not {grid}")
        return g.field
    xx, yy = grid.coords()
    x, y = xx - 0.5, yy - 0.5
    one, zero = torch.ones_like(x), torch.zeros_like(x)
    match g.kind:
        case GeneratorKind.TranslateX:
            ux, uy = one, zero
        case GeneratorKind.TranslateY:
            ux, uy = zero, one
        case GeneratorKind.Rotate:
            ux, uy = -y, x
        case GeneratorKind.Dilate:
            ux, uy = x, y
        case GeneratorKind.ShearX:
            ux, uy = y, zero
    return VectorField(grid, ux, uy)


class GeneratorBasis:

    def __init__(self, generators: list[Generator]):
        if not generators:
            raise ConfigError("a generator basis needs at least one generator")
        grids = {g.field.grid for g in generators if g.field is not None}
        if len(grids) > 1:
            raise ConformabilityError("custom generators live on different grids")
        self.generators = list(generators)

    @classmethod
    def from_kinds(cls, *kinds: str) -> "GeneratorBasis":
        return cls([Generator(GeneratorKind[k]) for k in kinds])

    @classmethod
    def from_tags(cls, tags: list[str], grid: Grid) -> "GeneratorBasis":
        from gaugeflow.utils.io import read_vector_field
        generators = []
        for tag in tags:
            kind, _, path = tag.partition(":")
            if kind == "Custom":
                u = read_vector_field(path)
                if u.grid != grid:
                    raise ConformabilityError(f"{path} holds a {u.grid} field, expected {grid}")
                generators.append(Generator(GeneratorKind.Custom, u))
            else:
                generators.append(Generator(GeneratorKind[kind]))
        return cls(generators)

    def __len__(self):
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def __getitem__(self, i):
        return self.generators[i]

    @property
    def exact(self) -> bool:
        return not any(g.approximate_symmetry for g in self.generators)

    def fields(self, grid: Grid) -> list[VectorField]:
        return [generator_field(g, grid) for g in self.generators]


def assemble(basis: GeneratorBasis, phi: MultiField) -> VectorField:
    """A_φ = Σ φ_i X_i, pointwise."""
    if phi.channels != len(basis):
        raise ConformabilityError(f"φ has {phi.channels} channels, basis has {len(basis)} generators")
    xs = basis.fields(phi.grid)
    ux = sum(phi.values[i] * X.ux for i, X in enumerate(xs))
    uy = sum(phi.values[i] * X.uy for i, X in enumerate(xs))
    return VectorField(phi.grid, ux, uy)


def _sample(values: torch.Tensor, px: torch.Tensor, py: torch.Tensor) -> torch.Tensor:
    """Periodic bilinear interpolation of values (..., ny, nx) at fractional index points."""
    ny, nx = values.shape[-2:]
    j0 = torch.floor(px)
    i0 = torch.floor(py)
    wx = px - j0
    wy = py - i0
    j0 = j0.long() % nx
    i0 = i0.long() % ny
    j1 = (j0 + 1) % nx
    i1 = (i0 + 1) % ny
    return (values[..., i0, j0] * (1 - wx) * (1 - wy) + values[..., i0, j1] * wx * (1 - wy)
            + values[..., i1, j0] * (1 - wx) * wy + values[..., i1, j1] * wx * wy)


def trace_characteristics(X: VectorField, cfg: FlowConfig) -> tuple[torch.Tensor, torch.Tensor]:
    """Foot points of the backward characteristics ẋ = −X(x) after time t, in fractional
    index coordinates (column, row), integrated with RK4 in cfg.substeps steps."""
    grid = X.grid
    u = torch.stack([X.ux / grid.hx, X.uy / grid.hy])
    py, px = torch.meshgrid(torch.arange(grid.ny, dtype=u.dtype), torch.arange(grid.nx, dtype=u.dtype), indexing="ij")
    dt = cfg.t / cfg.substeps

    def velocity(px, py):
        v = _sample(u, px, py)
        return -v[0], -v[1]

    for _ in range(cfg.substeps):
        k1x, k1y = velocity(px, py)
        k2x, k2y = velocity(px + 0.5 * dt * k1x, py + 0.5 * dt * k1y)
        k3x, k3y = velocity(px + 0.5 * dt * k2x, py + 0.5 * dt * k2y)
        k4x, k4y = velocity(px + dt * k3x, py + dt * k3y)
        px = px + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        py = py + dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
    return px, py


def warp(S: ScalarField, X: VectorField, cfg: FlowConfig) -> ScalarField:
    """Pullback exp(tX)·S: S sampled at the foot of each node's backward characteristic.
    t = 0 or X ≡ 0 leaves every foot on its node, so S comes back bit-exactly."""
    if S.grid != X.grid:
        raise ConformabilityError(f"grid mismatch: {S.grid} vs {X.grid}")
    px, py = trace_characteristics(X, cfg)
    return ScalarField(S.grid, _sample(S.values, px, py))


def orbit_direction(S: ScalarField, g: Generator) -> ScalarField:
    X = generator_field(g, S.grid)
    dS = grad(S)
    return ScalarField(S.grid, -(X.ux * dS.ux + X.uy * dS.uy))


def orbit_directions(S: ScalarField, basis: GeneratorBasis) -> list[ScalarField]:
    return [orbit_direction(S, g) for g in basis]


def linearized_residual(S: ScalarField, basis: GeneratorBasis, phi: MultiField) -> ScalarField:
    """r_lin = Σ φ_i e_i."""
    if phi.channels != len(basis):
        raise ConformabilityError(f"φ has {phi.channels} channels, basis has {len(basis)} generators")
    if phi.grid != S.grid:
        raise ConformabilityError(f"grid mismatch: {S.grid} vs {phi.grid}")
    es = orbit_directions(S, basis)
    return ScalarField(S.grid, sum(phi.values[i] * e.values for i, e in enumerate(es)))
