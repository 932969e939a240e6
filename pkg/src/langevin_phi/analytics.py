"""Ornstein-Uhlenbeck closed forms and the mixing-rate bounds.

All chains here target ``nu = N(0, I/alpha)`` from ``rho_0 = N(0, c0 I)``.
Every iterate stays a centered isotropic Gaussian, so each law is one
variance and every KL is ``(d/2) [eps - log(1 + eps)]`` with
``eps = variance / reference_variance - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, StepSizeError


@dataclass(frozen=True)
class OuConfig:
    alpha: float
    eta: float
    d: int = 1
    c0: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "eta", "c0"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise PreconditionError(f"{name} must be positive and finite, got {value}")
        if int(self.d) != self.d or self.d < 1:
            raise PreconditionError(f"d must be a positive integer, got {self.d}")

    def require_ula_step(self):
        # tiny relative slack so eta = 1/alpha computed in floating point passes
        if self.alpha * self.eta > 1.0 + 1e-12:
            raise StepSizeError(f"ULA formulas need alpha*eta <= 1, got {self.alpha * self.eta}")


def _kl_from_eps(d, eps):
    if eps <= -1.0:
        raise PreconditionError(f"variance ratio 1 + eps = {1.0 + eps} must be positive")
    return 0.5 * d * (eps - math.log1p(eps))


# --------------------------------------------------------------------------
# ULA


def ou_ula_biased_variance(cfg: OuConfig) -> float:
    """Variance of the ULA stationary law ``2 / (alpha (2 - alpha eta))``."""
    cfg.require_ula_step()
    return 2.0 / (cfg.alpha * (2.0 - cfg.alpha * cfg.eta))


def ou_ula_variance(cfg: OuConfig, k: int) -> float:
    """``c_k = c_inf + (1 - alpha eta)^(2k) (c0 - c_inf)``."""
    c_inf = ou_ula_biased_variance(cfg)
    return c_inf + (1.0 - cfg.alpha * cfg.eta) ** (2 * k) * (cfg.c0 - c_inf)


def ou_ula_eps(cfg: OuConfig, k: int) -> float:
    """Relative excess variance ``c_k / c_inf - 1``.

    For ``c0 = 1`` this is ``(1 - alpha eta)^(2k) (2 alpha - eta alpha^2 - 2) / 2``.
    """
    cfg.require_ula_step()
    a, h = cfg.alpha, cfg.eta
    if cfg.c0 == 1.0:
        start = (2.0 * a - h * a * a - 2.0) / 2.0
    else:
        start = cfg.c0 * a * (2.0 - a * h) / 2.0 - 1.0
    return (1.0 - a * h) ** (2 * k) * start


def ou_ula_kl(cfg: OuConfig, k: int) -> float:
    """``KL(rho_k || nu^eta)`` along ULA."""
    return _kl_from_eps(cfg.d, ou_ula_eps(cfg, k))


# --------------------------------------------------------------------------
# proximal sampler


def _proximal_decay(alpha_eta, k):
    """``(1 + alpha eta)^(-2k)`` without overflowing for large ``k``."""
    return math.exp(-2.0 * k * math.log1p(alpha_eta))


def ou_proximal_step(cfg: OuConfig, c: float) -> float:
    """One proximal-sampler update of the X-variance."""
    a, h = cfg.alpha, cfg.eta
    return (c + h) / (1.0 + a * h) ** 2 + h / (1.0 + a * h)


def ou_proximal_variance(cfg: OuConfig, k: int) -> float:
    """``c_k = 1/alpha + (c0 - 1/alpha) / (1 + alpha eta)^(2k)``."""
    a = cfg.alpha
    return 1.0 / a + (cfg.c0 - 1.0 / a) * _proximal_decay(a * cfg.eta, k)


def ou_proximal_eps(cfg: OuConfig, k: int) -> float:
    """``alpha c_k - 1``; equals ``(alpha - 1) / (1 + alpha eta)^(2k)`` for ``c0 = 1``."""
    a = cfg.alpha
    return (a * cfg.c0 - 1.0) * _proximal_decay(a * cfg.eta, k)


def ou_proximal_kl(cfg: OuConfig, k: int) -> float:
    """``KL(rho_k^X || nu^X)`` along the proximal sampler."""
    return _kl_from_eps(cfg.d, ou_proximal_eps(cfg, k))


# --------------------------------------------------------------------------
# continuous time


def ou_langevin(cfg: OuConfig, t: float) -> tuple[float, float]:
    """Variance and ``KL(rho_t || nu)`` of the Langevin diffusion at time ``t``."""
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    a = cfg.alpha
    var = 1.0 / a + (cfg.c0 - 1.0 / a) * math.exp(-2.0 * a * t)
    return var, _kl_from_eps(cfg.d, a * var - 1.0)


# --------------------------------------------------------------------------
# contraction coefficients and theorem bounds


def contraction_bound_ula(alpha_si: float, L: float, eta: float) -> float:
    """``(1 + eta L)^2 / ((1 + eta L)^2 + 2 alpha eta)``."""
    if not (alpha_si > 0 and L > 0 and eta > 0):
        raise PreconditionError("alpha_si, L and eta must be > 0")
    if eta > 1.0 / L:
        raise StepSizeError(f"step size {eta} exceeds 1/L = {1.0 / L}")
    s = (1.0 + eta * L) ** 2
    return s / (s + 2.0 * alpha_si * eta)


@dataclass(frozen=True)
class ProximalContraction:
    forward: float
    backward: float
    composed: float


def contraction_bound_proximal(alpha_si: float, eta: float) -> ProximalContraction:
    """Forward and backward steps each contract by ``1/(1 + alpha eta)``."""
    if not (alpha_si > 0 and eta > 0):
        raise PreconditionError("alpha_si and eta must be > 0")
    one = 1.0 / (1.0 + alpha_si * eta)
    return ProximalContraction(one, one, one * one)


def theorem_bound(kind: str, alpha_si: float, L: float | None, eta: float, k: int, d0: float) -> float:
    """Right-hand side of the mixing theorems after ``k`` steps from ``D_0 = d0``.

    ``ula``: ``(1 + 2 alpha eta / (1 + eta L)^2)^(-k) d0``;
    ``proximal``: ``d0 / (1 + alpha eta)^(2k)`` (``L`` unused).
    """
    if k < 0:
        raise PreconditionError("k must be >= 0")
    if kind == "ula":
        if L is None:
            raise PreconditionError("ULA bound needs L")
        contraction_bound_ula(alpha_si, L, eta)  # validates
        rate = 1.0 + 2.0 * alpha_si * eta / (1.0 + eta * L) ** 2
        return d0 * rate ** (-k)
    if kind == "proximal":
        contraction_bound_proximal(alpha_si, eta)
        return d0 * _proximal_decay(alpha_si * eta, k)
    raise PreconditionError(f"unknown kind {kind!r}; valid: ula, proximal")


@dataclass(frozen=True)
class RateReport:
    per_step_factor: float
    r2: float
    window: tuple[int, int]


def fit_rate(series, window=None) -> RateReport:
    """Least-squares slope of ``log(value)`` against ``k``, exponentiated.

    ``series`` is a sequence of ``(k, value)``; ``window = (k_start, k_end)``
    is inclusive and defaults to the whole series.
    """
    ks = np.array([float(k) for k, _ in series])
    vals = np.array([float(v) for _, v in series])
    if window is not None:
        lo, hi = window
        keep = (ks >= lo) & (ks <= hi)
        ks, vals = ks[keep], vals[keep]
    if ks.size < 3:
        raise PreconditionError(f"need at least 3 points in the window, got {ks.size}")
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise PreconditionError("values must be positive and finite inside the window")
    if np.ptp(ks) == 0:
        raise PreconditionError("degenerate window")
    logs = np.log(vals)
    slope, intercept = np.polyfit(ks, logs, 1)
    resid = logs - (slope * ks + intercept)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    factor = math.exp(slope)
    if not 0 < factor <= 1:
        raise PreconditionError(f"fitted factor {factor} is not a contraction")
    return RateReport(factor, r2, (int(ks.min()), int(ks.max())))


def eps_window(eps_fn, cfg: OuConfig, k_max: int, threshold: float = 1.0) -> tuple[int, int] | None:
    """Longest initial run ``0..k`` with ``eps_k >= threshold``."""
    last = None
    for k in range(k_max + 1):
        if eps_fn(cfg, k) >= threshold:
            last = k
        else:
            break
    return None if last is None else (0, last)
