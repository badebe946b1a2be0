import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy import stats

from gaugeflow.errors import ConfigError
from gaugeflow.stats.sampling import chunks, projection_samples, sample_sphere, stream
from gaugeflow.stats.special import betainc, log_gamma_ratio, reg_inc_beta

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CapQuery:
    m: int  # search-space dimension
    tau: float  # effective threshold

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError(f"cap query needs an integer m >= 2, got {self.m}")
        if math.isnan(self.tau):
            raise ConfigError("cap query threshold is NaN")


@dataclass(frozen=True)
class CrossingSetup:
    dist: float  # distance to the boundary
    t_max: float  # step budget |t| <= t_max
    rho: float  # ‖P_W n‖

    def __post_init__(self):
        if self.t_max <= 0:
            raise ConfigError("t_max must be > 0")
        if self.dist < 0 or self.rho < 0:
            raise ConfigError("dist and rho must be >= 0")


@dataclass(frozen=True, eq=False)
class NormalVector:
    n: np.ndarray

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.n)) - 1.0) > 1e-12:
            raise ConfigError("normal vector must have unit norm")

    @property
    def m(self) -> int:
        return self.n.shape[0]


def cap_probability(q: CapQuery) -> float:
    """Pr(|⟨u, n⟩| >= τ) for u uniform on the unit sphere of ℝ^m."""
    if q.tau <= 0:
        return 1.0
    if q.tau >= 1:
        return 0.0
    return reg_inc_beta(1 - q.tau**2, (q.m - 1) / 2, 0.5)


def cap_probabilities(m: int, taus: np.ndarray) -> np.ndarray:
    """Vectorized cap_probability over thresholds."""
    taus = np.asarray(taus, dtype=np.float64)
    inside = (taus > 0) & (taus < 1)
    x = np.where(inside, 1 - np.clip(taus, 0, 1) ** 2, 0.5)
    p = betainc(torch.from_numpy(x), (m - 1) / 2, 0.5).numpy()
    return np.where(taus <= 0, 1.0, np.where(taus >= 1, 0.0, p))


def effective_tau(setup: CrossingSetup) -> float:
    if setup.rho == 0:
        return math.inf
    return setup.dist / (setup.t_max * setup.rho)


def cos_threshold(m: int, m0: int) -> float:
    """Γ(m0/2)Γ((m−1)/2) / (Γ(m/2)Γ((m0−1)/2)), roughly √(m0/m) for large m."""
    if not 2 <= m0 <= m:
        raise ConfigError(f"cos_threshold needs 2 <= m0 <= m, got m={m}, m0={m0}")
    if m0 == m:
        return 1.0
    return math.exp(log_gamma_ratio([m0 / 2, (m - 1) / 2], [m / 2, (m0 - 1) / 2]))


def miss_density(m: int) -> float:
    """d/dτ (1 − cap_probability) at τ = 0: twice the density of one coordinate of a uniform unit vector."""
    return 2 * math.exp(log_gamma_ratio([m / 2], [(m - 1) / 2])) / math.sqrt(math.pi)


def dimension_drop(m: int, m0: int) -> float:
    """Ratio of small-threshold miss densities between an m0-dimensional slice and the full space."""
    return miss_density(m0) / miss_density(m)


def miss_ratio(m: int, m0: int, cos_theta: float) -> float:
    """First-order (1 − P_U0)/(1 − P_U) as τ → 0 for a slice at angle θ to the normal."""
    return dimension_drop(m, m0) / cos_theta


def mc_cap(n: NormalVector, setup: CrossingSetup, m: int, N: int, seed: int, chunk: int = 20_000) -> tuple[float, float]:
    """Monte Carlo estimate of the crossing probability and its binomial standard error."""
    if N < 1000:
        raise ConfigError("mc_cap needs N >= 1000")
    if n.m != m:
        raise ConfigError(f"normal lives in ℝ^{n.m}, not ℝ^{m}")
    tau = effective_tau(setup)
    hits = 0
    for index, size in chunks(N, chunk):
        u = sample_sphere(m, stream(seed, "mc_cap", index), size)
        hits += int((np.abs(u @ n.n) >= tau).sum())
    p = hits / N
    return p, math.sqrt(p * (1 - p) / N)


@dataclass
class SliceReport:
    m: int
    m0: int
    cos_theta: float
    tau_u: float
    p_slice: float
    p_random: float
    sigma_random: float
    holds: bool  # P_U0 >= E[P_rand]
    near_boundary: bool  # within 2 % of each other


def slice_vs_random(m: int, m0: int, cos_theta: float, tau_u: float, trials: int, seed: int) -> SliceReport:
    """Compare the crossing probability of the symmetry slice U0 with the mean over random
    m0-dimensional subspaces, drawing ‖P_rand n‖² = B from its Beta law."""
    if tau_u > 0.1:
        raise ConfigError("slice comparison is only meaningful for tau_U <= 0.1")
    if not 2 <= m0 <= m:
        raise ConfigError(f"slice comparison needs 2 <= m0 <= m, got m={m}, m0={m0}")
    p_slice = 0.0 if cos_theta == 0 else cap_probability(CapQuery(m0, tau_u / cos_theta))
    if m0 == m:
        B = np.ones(trials)
    else:
        B = stream(seed, "slice_vs_random").beta(m0 / 2, (m - m0) / 2, size=trials)
    with np.errstate(divide="ignore"):
        p = cap_probabilities(m0, tau_u / np.sqrt(B))
    p_random = float(p.mean())
    sigma = float(p.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    near = abs(p_slice - p_random) <= 0.02 * max(p_random, 1e-300)
    if near:
        logger.info("slice comparison m=%d m0=%d cosθ=%.4f is within 2%% of the random mean", m, m0, cos_theta)
    return SliceReport(m, m0, cos_theta, tau_u, p_slice, p_random, sigma, p_slice >= p_random, near)


def projection_tail(m: int, m0: int, eps: float, N: int, seed: int) -> float:
    """Empirical Pr(B <= m0/m − ε) for B = ‖P_rand n‖²."""
    if m0 == m:
        return 0.0
    B = stream(seed, "projection_tail", m).beta(m0 / 2, (m - m0) / 2, size=N)
    return float((B <= m0 / m - eps).mean())


@dataclass
class ProjectionLaw:
    m: int
    m0: int
    mean: float
    mean_expected: float
    sigma_mean: float
    var: float
    var_expected: float
    sigma_var: float
    ks_stat: float
    ks_pvalue: float

    @property
    def passes(self) -> bool:
        return (abs(self.mean - self.mean_expected) <= 3 * self.sigma_mean
                and abs(self.var - self.var_expected) <= 4 * self.sigma_var
                and self.ks_pvalue >= 0.01)


def projection_law_check(m: int, m0: int, N: int, seed: int, chunk: int = 2_000) -> ProjectionLaw:
    """Moments and Kolmogorov–Smirnov distance of ‖P_rand n‖² against Beta(m0/2, (m−m0)/2)."""
    if not 1 <= m0 < m:
        raise ConfigError(f"projection law needs 1 <= m0 < m, got m={m}, m0={m0}")
    B = projection_samples(m, m0, N, seed, chunk)
    mean_e = m0 / m
    var_e = 2 * m0 * (m - m0) / (m**2 * (m + 2))
    mean, var = float(B.mean()), float(B.var(ddof=1))
    mu4 = float(((B - mean) ** 4).mean())
    a, b = m0 / 2, (m - m0) / 2
    ks = stats.kstest(B, lambda x: betainc(torch.from_numpy(np.clip(x, 0, 1)), a, b).numpy())
    return ProjectionLaw(m, m0, mean, mean_e, math.sqrt(var_e / N), var, var_e,
                         math.sqrt(max(mu4 - var**2, 0.0) / N), float(ks.statistic), float(ks.pvalue))
