from dataclasses import dataclass

import torch

from gaugeflow.errors import ConformabilityError
from gaugeflow.geometry.fields import ScalarField
from gaugeflow.geometry.lieflow import GeneratorBasis, orbit_directions


@dataclass(frozen=True, eq=False)
class OrbitBasis:
    e: list[ScalarField]

    def __post_init__(self):
        if not self.e:
            raise ConformabilityError("an orbit basis needs at least one direction")
        for f in self.e[1:]:
            if f.grid != self.e[0].grid:
                raise ConformabilityError("orbit directions live on different grids")

    @classmethod
    def at(cls, S: ScalarField, basis: GeneratorBasis) -> "OrbitBasis":
        return cls(orbit_directions(S, basis))

    @property
    def grid(self):
        return self.e[0].grid

    @property
    def d(self) -> int:
        return len(self.e)

    @property
    def values(self) -> torch.Tensor:
        return torch.stack([f.values for f in self.e])


@dataclass(frozen=True, eq=False)
class GramData:
    G: torch.Tensor
    Gplus: torch.Tensor
    rank: int
    cutoff: float


def gram(basis: OrbitBasis, cutoff: float = 1e-10) -> GramData:
    E = basis.values.flatten(1)
    G = E @ E.T * basis.grid.measure
    G = 0.5 * (G + G.T)
    w, V = torch.linalg.eigh(G)
    wmax = float(w.max())
    keep = w > cutoff * wmax if wmax > 0 else torch.zeros_like(w, dtype=torch.bool)
    inv = torch.where(keep, 1.0 / torch.where(keep, w, torch.ones_like(w)), torch.zeros_like(w))
    Gplus = V @ torch.diag(inv) @ V.T
    return GramData(G, 0.5 * (Gplus + Gplus.T), int(keep.sum()), cutoff)


def correlations(r: ScalarField, basis: OrbitBasis) -> torch.Tensor:
    """b_i = ⟨r, e_i⟩."""
    if r.grid != basis.grid:
        raise ConformabilityError(f"grid mismatch: {r.grid} vs {basis.grid}")
    return (basis.values * r.values).flatten(1).sum(1) * r.grid.measure


def project(f: ScalarField, basis: OrbitBasis, g: GramData) -> tuple[ScalarField, ScalarField]:
    """Split f into its orbit-tangent part P f and the normal remainder f − P f."""
    coef = g.Gplus @ correlations(f, basis)
    tangent = ScalarField(f.grid, torch.tensordot(coef, basis.values, dims=1))
    return tangent, ScalarField(f.grid, f.values - tangent.values)


def data_b(r: ScalarField, basis: OrbitBasis, g: GramData) -> torch.Tensor:
    """bᵀ 𝒢⁺ b, which equals ‖P r‖²."""
    b = correlations(r, basis)
    return b @ g.Gplus @ b
