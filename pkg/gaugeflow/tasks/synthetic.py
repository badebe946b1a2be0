import math
from dataclasses import dataclass

import numpy as np
import torch

from gaugeflow.config import TaskConfig
from gaugeflow.errors import ConfigError, ConformabilityError
from gaugeflow.geometry.fields import Grid, ScalarField, inner_product, shift
from gaugeflow.stats.sampling import stream

KINDS = ("TemplateCorr", "NormBand", "SmoothQuadratic", "LinearProbe")


@dataclass(frozen=True, eq=False)
class SyntheticTask:
    kind: str
    theta: float
    w0: float = 0.0
    w1: float = 1.0
    template: ScalarField | None = None  # TemplateCorr
    mask: ScalarField | None = None  # LinearProbe
    lipschitz: float | None = None
    tie_tol: float = 1e-12

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown task kind {self.kind!r}")
        if not self.w0 < self.w1:
            raise ConfigError("task needs w0 < w1")
        if self.kind == "TemplateCorr" and self.template is None:
            raise ConfigError("TemplateCorr needs a template field")
        if self.kind == "LinearProbe" and self.mask is None:
            raise ConfigError("LinearProbe needs a mask field")

    @property
    def L(self) -> float:
        """Lipschitz constant of the gradient of F; 0 marks an unknown bound."""
        if self.lipschitz is not None:
            return self.lipschitz
        return 2.0 if self.kind in ("NormBand", "SmoothQuadratic") else 0.0

    @property
    def invariant(self) -> bool:
        return self.kind != "LinearProbe"


def correlation(template: ScalarField, S: ScalarField) -> torch.Tensor:
    """c[ky, kx] = ⟨shift_k(template), S⟩ for every cyclic shift k, through the FFT."""
    if template.grid != S.grid:
        raise ConformabilityError(f"grid mismatch: {template.grid} vs {S.grid}")
    spec = torch.conj(torch.fft.fft2(template.values)) * torch.fft.fft2(S.values)
    return torch.fft.ifft2(spec).real * S.grid.measure


def _argmax_shift(task: SyntheticTask, S: ScalarField) -> tuple[float, int, int, bool]:
    c = correlation(task.template, S)
    cmax = float(c.max())
    near = (c >= cmax - task.tie_tol * (1 + abs(cmax))).flatten()
    k = int(torch.nonzero(near)[0])  # smallest row-major index
    ky, kx = divmod(k, S.grid.nx)
    # the winning value is recomputed by direct quadrature, free of FFT roundoff
    value = float(inner_product(shift(task.template, kx, ky), S))
    return value, kx, ky, int(near.sum()) > 1


def eval_F(task: SyntheticTask, S: ScalarField) -> float:
    match task.kind:
        case "TemplateCorr":
            return task.theta - _argmax_shift(task, S)[0]
        case "NormBand" | "SmoothQuadratic":
            return task.theta - float(inner_product(S, S))
        case "LinearProbe":
            return task.theta - float(inner_product(task.mask, S))


def eval_W(task: SyntheticTask, S: ScalarField) -> float:
    # the boundary belongs to the low-cost cell
    return task.w0 if eval_F(task, S) <= 0 else task.w1


def clarke_subgradient(task: SyntheticTask, S: ScalarField) -> tuple[ScalarField, bool]:
    """An element of the Clarke subdifferential of F at S, and whether the argmax shift was tied."""
    match task.kind:
        case "TemplateCorr":
            _, kx, ky, tie = _argmax_shift(task, S)
            return -shift(task.template, kx, ky), tie
        case "NormBand" | "SmoothQuadratic":
            return -2 * S, False
        case "LinearProbe":
            return -task.mask, False


def smooth_signal(grid: Grid, amplitude: float, modes: int, seed: int, op: str = "signal") -> ScalarField:
    """Random trigonometric polynomial with `modes` low-frequency terms and RMS `amplitude`."""
    rng = stream(seed, op)
    xx, yy = grid.coords()
    values = torch.zeros(grid.shape, dtype=torch.float64)
    for _ in range(modes):
        kx, ky = rng.integers(-2, 3, size=2)
        if kx == 0 and ky == 0:
            kx = 1
        phase = rng.uniform(0, 2 * math.pi)
        values += rng.normal() * torch.cos(2 * math.pi * (int(kx) * xx + int(ky) * yy) + phase)
    rms = float(torch.sqrt((values**2).mean()))
    return ScalarField(grid, values * (amplitude / rms))


def make_task(tcfg: TaskConfig, S: ScalarField, seed: int) -> SyntheticTask:
    """Task from config around signal S; theta, when not given, puts S at relative gap `gap`
    outside the low-cost cell."""
    grid = S.grid
    template = mask = None
    match tcfg.kind:
        case "TemplateCorr":
            template = smooth_signal(grid, float(torch.sqrt((S.values**2).mean())), tcfg.modes, seed, "template")
            base = float(correlation(template, S).max())
        case "NormBand" | "SmoothQuadratic":
            base = float(inner_product(S, S))
        case "LinearProbe":
            mask = smooth_signal(grid, 1.0, tcfg.modes, seed, "mask")
            base = float(inner_product(mask, S))
    theta = tcfg.theta if tcfg.theta is not None else base + tcfg.gap * abs(base)
    return SyntheticTask(tcfg.kind, theta, tcfg.w0, tcfg.w1, template, mask, tcfg.lipschitz)


@dataclass
class AuditResult:
    max_deviation: float
    w_changed: bool
    shifts: int

    @property
    def violation(self) -> bool:
        return self.max_deviation > 1e-10 or self.w_changed


def invariance_audit(task: SyntheticTask, S: ScalarField, k_samples: int, rng: np.random.Generator) -> AuditResult:
    """Largest |F(gS) − F(S)| over sampled integer translations g, and whether W ever changed."""
    if k_samples < 1:
        raise ConfigError("invariance audit needs k_samples >= 1")
    F0, W0 = eval_F(task, S), eval_W(task, S)
    worst, changed = 0.0, False
    for _ in range(k_samples):
        kx, ky = int(rng.integers(0, S.grid.nx)), int(rng.integers(0, S.grid.ny))
        gS = shift(S, kx, ky)
        worst = max(worst, abs(eval_F(task, gS) - F0))
        changed = changed or eval_W(task, gS) != W0
    return AuditResult(worst, changed, k_samples)
