from dataclasses import dataclass
from typing import Callable

import torch

from gaugeflow.errors import ConfigError, ConformabilityError, NumericError

DTYPE = torch.float64


@dataclass(frozen=True)
class Grid:
    """Periodic nx×ny grid on the unit torus [0,1)². Node (i, j) sits at x = j·hx, y = i·hy."""
    nx: int
    ny: int

    def __post_init__(self):
        if not (isinstance(self.nx, int) and isinstance(self.ny, int)):
            raise ConfigError(f"grid sizes must be integers, got {self.nx!r}×{self.ny!r}")
        if self.nx < 4 or self.ny < 4:
            raise ConfigError(f"grid must be at least 4×4, got {self.nx}×{self.ny}")

    @property
    def hx(self) -> float:
        return 1.0 / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    @property
    def measure(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def coords(self) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.arange(self.nx, dtype=DTYPE) * self.hx
        y = torch.arange(self.ny, dtype=DTYPE) * self.hy
        yy, xx = torch.meshgrid(y, x, indexing="ij")
        return xx, yy


def _check_finite(*tensors: torch.Tensor):
    for t in tensors:
        if not torch.isfinite(t).all():
            raise NumericError("field contains non-finite values")


def _conform(a, b):
    if a.grid != b.grid:
        raise ConformabilityError(f"grid mismatch: {a.grid} vs {b.grid}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: torch.Tensor  # (ny, nx)

    def __post_init__(self):
        if tuple(self.values.shape) != self.grid.shape:
            raise ConformabilityError(f"values of shape {tuple(self.values.shape)} do not fit {self.grid}")
        _check_finite(self.values)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, torch.full(grid.shape, float(c), dtype=DTYPE))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, torch.zeros(grid.shape, dtype=DTYPE))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor]) -> "ScalarField":
        xx, yy = grid.coords()
        return cls(grid, torch.broadcast_to(torch.as_tensor(fn(xx, yy), dtype=DTYPE), grid.shape).clone())

    def _other(self, other):
        if isinstance(other, ScalarField):
            _conform(self, other)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, other - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def detach(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.detach())


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    ux: torch.Tensor
    uy: torch.Tensor

    def __post_init__(self):
        for u in (self.ux, self.uy):
            if tuple(u.shape) != self.grid.shape:
                raise ConformabilityError(f"component of shape {tuple(u.shape)} does not fit {self.grid}")
        _check_finite(self.ux, self.uy)

    @classmethod
    def constant(cls, grid: Grid, cx: float, cy: float) -> "VectorField":
        return cls(grid, torch.full(grid.shape, float(cx), dtype=DTYPE), torch.full(grid.shape, float(cy), dtype=DTYPE))

    def __add__(self, other: "VectorField"):
        _conform(self, other)
        return VectorField(self.grid, self.ux + other.ux, self.uy + other.uy)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _conform(self, other)
            other = other.values
        return VectorField(self.grid, self.ux * other, self.uy * other)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class MultiField:
    grid: Grid
    values: torch.Tensor  # (channels, ny, nx)

    def __post_init__(self):
        if self.values.dim() != 3 or tuple(self.values.shape[1:]) != self.grid.shape or self.values.shape[0] < 1:
            raise ConformabilityError(f"values of shape {tuple(self.values.shape)} do not fit {self.grid}")
        _check_finite(self.values)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, grid: Grid, channels: int) -> "MultiField":
        return cls(grid, torch.zeros((channels, *grid.shape), dtype=DTYPE))

    @classmethod
    def constant(cls, grid: Grid, c) -> "MultiField":
        c = torch.as_tensor(c, dtype=DTYPE).reshape(-1, 1, 1)
        return cls(grid, c.expand(c.shape[0], *grid.shape).clone())

    @classmethod
    def stack(cls, fields: list[ScalarField]) -> "MultiField":
        for f in fields[1:]:
            _conform(fields[0], f)
        return cls(fields[0].grid, torch.stack([f.values for f in fields]))

    def channel(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])

    def square_norm(self) -> ScalarField:
        """Pointwise |φ|², the channel sum of squares."""
        return ScalarField(self.grid, (self.values**2).sum(0))

    def _other(self, other):
        if isinstance(other, MultiField):
            _conform(self, other)
            if other.channels != self.channels:
                raise ConformabilityError(f"channel mismatch: {self.channels} vs {other.channels}")
            return other.values
        return other

    def __add__(self, other):
        return MultiField(self.grid, self.values + self._other(other))

    def __sub__(self, other):
        return MultiField(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return MultiField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return MultiField(self.grid, -self.values)

    def detach(self) -> "MultiField":
        return MultiField(self.grid, self.values.detach())


def _dx(t: torch.Tensor, h: float) -> torch.Tensor:
    return (torch.roll(t, -1, dims=-1) - torch.roll(t, 1, dims=-1)) / (2 * h)


def _dy(t: torch.Tensor, h: float) -> torch.Tensor:
    return (torch.roll(t, -1, dims=-2) - torch.roll(t, 1, dims=-2)) / (2 * h)


def _laplacian(t: torch.Tensor, grid: Grid) -> torch.Tensor:
    # −div∇ with the same central differences as grad, so summation by parts is exact
    return -(_dx(_dx(t, grid.hx), grid.hx) + _dy(_dy(t, grid.hy), grid.hy))


def inner_product(f, g) -> torch.Tensor:
    """L² pairing Σ f·g·μ. Multi- and vector fields pair channel by channel."""
    if type(f) is not type(g):
        raise ConformabilityError(f"cannot pair {type(f).__name__} with {type(g).__name__}")
    _conform(f, g)
    if isinstance(f, VectorField):
        s = (f.ux * g.ux).sum() + (f.uy * g.uy).sum()
    else:
        if f.values.shape != g.values.shape:
            raise ConformabilityError(f"channel mismatch: {tuple(f.values.shape)} vs {tuple(g.values.shape)}")
        s = (f.values * g.values).sum()
    return s * f.grid.measure


def norm(f) -> float:
    return float(torch.sqrt(inner_product(f, f)))


def integrate(f: ScalarField) -> torch.Tensor:
    return f.values.sum() * f.grid.measure


def grad(f: ScalarField) -> VectorField:
    return VectorField(f.grid, _dx(f.values, f.grid.hx), _dy(f.values, f.grid.hy))


def divergence(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, _dx(u.ux, u.grid.hx) + _dy(u.uy, u.grid.hy))


def laplacian(f):
    """Nonnegative Laplacian Δ = −div∇, applied channel-wise to multi-fields."""
    if isinstance(f, MultiField):
        return MultiField(f.grid, _laplacian(f.values, f.grid))
    return ScalarField(f.grid, _laplacian(f.values, f.grid))


def dirichlet(phi: MultiField) -> torch.Tensor:
    """‖∇φ‖² summed over channels."""
    g = phi.grid
    return ((_dx(phi.values, g.hx) ** 2).sum() + (_dy(phi.values, g.hy) ** 2).sum()) * g.measure


def shift(f, kx: int, ky: int):
    """Circular shift: shift(f)(x, y) = f(x − kx·hx, y − ky·hy)."""
    if isinstance(f, VectorField):
        return VectorField(f.grid, torch.roll(f.ux, (ky, kx), dims=(-2, -1)), torch.roll(f.uy, (ky, kx), dims=(-2, -1)))
    return type(f)(f.grid, torch.roll(f.values, (ky, kx), dims=(-2, -1)))
