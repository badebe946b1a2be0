import math

import torch

from gaugeflow.errors import DomainError, NumericError

EPS = 1e-12
FPMIN = 1e-300
MAXIT = 10_000


def _fix(t: torch.Tensor) -> torch.Tensor:
    return torch.where(t.abs() < FPMIN, torch.full_like(t, FPMIN), t)


def _betacf(x: torch.Tensor, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Continued fraction of I_x(a, b), modified Lentz."""
    qab, qap, qam = a + b, a + 1, a - 1
    c = torch.ones_like(x)
    d = 1 / _fix(1 - qab * x / qap)
    h = d.clone()
    done = torch.zeros_like(x, dtype=torch.bool)
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1 / _fix(1 + aa * d)
        c = _fix(1 + aa / c)
        h = torch.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1 / _fix(1 + aa * d)
        c = _fix(1 + aa / c)
        delta = d * c
        h = torch.where(done, h, h * delta)
        done = done | ((delta - 1).abs() < EPS)
        if bool(done.all()):
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge in {MAXIT} iterations")


def betainc(x, a, b) -> torch.Tensor:
    """Regularized incomplete beta I_x(a, b), elementwise over broadcast tensors."""
    x, a, b = torch.broadcast_tensors(*(torch.as_tensor(v, dtype=torch.float64) for v in (x, a, b)))
    if not (((x >= 0) & (x <= 1)).all() and (a > 0).all() and (b > 0).all()):
        raise DomainError("betainc needs 0 <= x <= 1, a > 0, b > 0")
    swap = x > (a + 1) / (a + b + 2)
    xs = torch.where(swap, 1 - x, x)
    as_ = torch.where(swap, b, a)
    bs = torch.where(swap, a, b)
    front = torch.exp(torch.lgamma(as_ + bs) - torch.lgamma(as_) - torch.lgamma(bs)
                      + as_ * torch.log(xs) + bs * torch.log1p(-xs))
    part = front * _betacf(xs, as_, bs) / as_
    out = torch.where(swap, 1 - part, part)
    out = torch.where(x == 0, torch.zeros_like(out), out)
    return torch.where(x == 1, torch.ones_like(out), out)


def reg_inc_beta(x: float, a: float, b: float) -> float:
    if any(math.isnan(v) for v in (x, a, b)):
        raise DomainError("betainc arguments must not be NaN")
    return float(betainc(x, a, b))


def log_gamma_ratio(num: list[float], den: list[float]) -> float:
    """log(Π Γ(num) / Π Γ(den))."""
    return sum(math.lgamma(v) for v in num) - sum(math.lgamma(v) for v in den)
