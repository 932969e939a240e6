"""Phi-functions, Phi-divergences, Phi-entropy and Phi-Fisher information.

A Phi-divergence is ``D(mu || nu) = E_nu[Phi(dmu/dnu)]`` for convex ``Phi``
with ``Phi(1) = 0``. Exact values are available for centered isotropic
Gaussian pairs; everything else goes through Monte Carlo with normalized
log density ratios. ``math.inf`` is returned (not raised) whenever a
divergence does not exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .errors import PreconditionError

INF = math.inf


@dataclass(frozen=True)
class PhiFunction:
    """A convex generator with its first two derivatives.

    ``zero_limit`` is the value used at ``r = 0`` (``math.inf`` when
    ``Phi`` blows up there). ``smooth`` marks twice-differentiable,
    strictly convex entries; only those are accepted by the Fisher
    information and Phi-Sobolev machinery. ``sobolev_class`` marks entries
    with ``1/Phi''`` concave; only for those does strong log-concavity
    transfer to a Phi-Sobolev inequality with the same constant. For the
    other smooth entries Gaussian pairs violate ``2 alpha D <= FI`` with
    ``alpha = 1/variance``.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d1: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d2: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    smooth: bool
    zero_limit: float
    sobolev_class: bool = False

    def __call__(self, r):
        return self.value(r)


def _guard(fn, at_zero):
    def wrapped(r):
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = fn(r)
        out = np.where(r == 0.0, at_zero, out)
        return out[()] if out.ndim == 0 else out

    return wrapped


def _make_registry():
    half = 0.5
    entries = [
        PhiFunction(
            "kl",
            _guard(lambda r: special.xlogy(r, r), 0.0),
            _guard(lambda r: np.log(r) + 1.0, -INF),
            _guard(lambda r: 1.0 / r, INF),
            True,
            0.0,
            True,
        ),
        PhiFunction(
            "chi2",
            _guard(lambda r: (r - 1.0) ** 2, 1.0),
            _guard(lambda r: 2.0 * (r - 1.0), -2.0),
            _guard(lambda r: np.full_like(r, 2.0), 2.0),
            True,
            1.0,
            True,
        ),
        PhiFunction(
            "hellinger2",
            _guard(lambda r: (np.sqrt(r) - 1.0) ** 2, 1.0),
            _guard(lambda r: 1.0 - 1.0 / np.sqrt(r), -INF),
            _guard(lambda r: half * r**-1.5, INF),
            True,
            1.0,
        ),
        PhiFunction(
            "tv",
            _guard(lambda r: half * np.abs(r - 1.0), half),
            _guard(lambda r: half * np.sign(r - 1.0), -half),
            _guard(lambda r: np.zeros_like(r), 0.0),
            False,
            half,
        ),
        PhiFunction(
            "reverse_kl",
            _guard(lambda r: -np.log(r), INF),
            _guard(lambda r: -1.0 / r, -INF),
            _guard(lambda r: 1.0 / r**2, INF),
            True,
            INF,
        ),
        PhiFunction(
            "reverse_chi2",
            _guard(lambda r: 1.0 / r - r, INF),
            _guard(lambda r: -1.0 / r**2 - 1.0, -INF),
            _guard(lambda r: 2.0 / r**3, INF),
            True,
            INF,
        ),
    ]
    return {p.name: p for p in entries}


_REGISTRY = _make_registry()
PHI_NAMES = tuple(_REGISTRY)


def phi_registry(name: str) -> PhiFunction:
    """Look up a Phi-function by name."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown phi {name!r}; valid names: {', '.join(PHI_NAMES)}") from None


def as_phi(phi) -> PhiFunction:
    return phi if isinstance(phi, PhiFunction) else phi_registry(phi)


@dataclass(frozen=True)
class GaussianSpec:
    """Centered isotropic Gaussian ``N(0, variance * I_d)``."""

    d: int
    variance: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise PreconditionError(f"dimension must be a positive integer, got {self.d}")
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise PreconditionError(f"variance must be positive and finite, got {self.variance}")

    @property
    def precision(self) -> float:
        return 1.0 / self.variance

    def log_density(self, x):
        x = np.asarray(x, dtype=np.float64)
        sq = np.sum(x * x, axis=-1)
        return -0.5 * sq / self.variance - 0.5 * self.d * math.log(2 * math.pi * self.variance)


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    std_error: float = 0.0
    n_samples: int = 0
    kind: str = "closed_form"
    n_nonfinite: int = 0

    def __float__(self):
        return float(self.value)


def gaussian_log_ratio(mu: GaussianSpec, nu: GaussianSpec):
    """``x -> log(dmu/dnu)(x)`` for two centered isotropic Gaussians."""
    _same_dim(mu, nu)
    kappa = 1.0 / mu.variance - 1.0 / nu.variance
    const = -0.5 * mu.d * math.log(mu.variance / nu.variance)

    def log_ratio(x):
        x = np.asarray(x, dtype=np.float64)
        return const - 0.5 * kappa * np.sum(x * x, axis=-1)

    return log_ratio


def gaussian_score_diff(mu: GaussianSpec, nu: GaussianSpec):
    """``x -> grad log(dmu/dnu)(x)``."""
    _same_dim(mu, nu)
    kappa = 1.0 / mu.variance - 1.0 / nu.variance
    return lambda x: -kappa * np.asarray(x, dtype=np.float64)


def _same_dim(mu, nu):
    if mu.d != nu.d:
        raise PreconditionError(f"dimension mismatch: {mu.d} vs {nu.d}")


def gaussian_phi_divergence(phi, mu: GaussianSpec, nu: GaussianSpec) -> DivergenceEstimate:
    """Exact ``D_phi(mu || nu)`` for centered isotropic Gaussians.

    Closed forms cover kl, reverse_kl, chi2, reverse_chi2 and hellinger2.
    tv is integrated numerically and only supported for ``d = 1``.
    """
    phi = as_phi(phi)
    _same_dim(mu, nu)
    a, b, d = mu.variance, nu.variance, mu.d
    # every form below is written in the exact difference a - b so that
    # nearly equal variances do not lose digits to cancellation
    if phi.name == "kl":
        x = (a - b) / b
        value = 0.5 * d * (x - math.log1p(x))
    elif phi.name == "reverse_kl":
        x = (b - a) / a
        value = 0.5 * d * (x - math.log1p(x))
    elif phi.name in ("chi2", "reverse_chi2"):
        # reverse_chi2 reduces to chi2(nu || mu)
        p, q = (a, b) if phi.name == "chi2" else (b, a)
        if 2.0 * q <= p:
            value = INF
        else:
            # q^2 / (p (2q - p)) = 1 / (1 - ((q - p)/q)^2)
            t = (q - p) / q
            value = math.expm1(-0.5 * d * math.log1p(-t * t))
    elif phi.name == "hellinger2":
        t = (a - b) / (a + b)
        value = -2.0 * math.expm1(0.25 * d * math.log1p(-t * t))
    elif phi.name == "tv":
        if d != 1:
            raise PreconditionError("tv closed form is only available for d = 1")
        return DivergenceEstimate(_tv_1d(a, b), kind="quadrature")
    else:
        raise PreconditionError(f"no Gaussian closed form for phi {phi.name!r}")
    return DivergenceEstimate(max(value, 0.0))


def _tv_1d(a, b):
    if a == b:
        return 0.0
    sa, sb = math.sqrt(a), math.sqrt(b)
    cross = math.sqrt(a * b * math.log(a / b) / (a - b))

    def integrand(x):
        return 0.5 * abs(stats.norm.pdf(x, scale=sa) - stats.norm.pdf(x, scale=sb))

    # symmetric integrand: twice the positive half-line
    lo, _ = integrate.quad(integrand, 0.0, cross, epsabs=0, epsrel=1e-12, limit=200)
    hi, _ = integrate.quad(integrand, cross, math.inf, epsabs=0, epsrel=1e-12, limit=200)
    return 2.0 * (lo + hi)


# Phi''(r) = c * r**m for every smooth registry entry
_D2_MONOMIAL = {
    "kl": (1.0, -1.0),
    "chi2": (2.0, 0.0),
    "hellinger2": (0.5, -1.5),
    "reverse_kl": (1.0, -2.0),
    "reverse_chi2": (2.0, -3.0),
}


def gaussian_phi_fisher_info(phi, mu: GaussianSpec, nu: GaussianSpec) -> DivergenceEstimate:
    """``FI_phi(mu || nu) = E_mu[r Phi''(r) |grad log r|^2]`` for Gaussian pairs.

    With ``Phi''(r) = c r**m`` and ``q = m + 1`` this is
    ``c kappa^2 int mu^(1+q) nu^(-q) |x|^2 dx``, a Gaussian integral that is
    finite iff the combined precision ``(1+q)/a - q/b`` is positive.
    """
    phi = as_phi(phi)
    _require_smooth(phi)
    _same_dim(mu, nu)
    if phi.name not in _D2_MONOMIAL:
        raise PreconditionError(f"no closed-form Fisher information for phi {phi.name!r}")
    a, b, d = mu.variance, nu.variance, mu.d
    kappa = 1.0 / a - 1.0 / b
    if kappa == 0.0:
        return DivergenceEstimate(0.0)
    c, m = _D2_MONOMIAL[phi.name]
    q = m + 1.0
    prec = (1.0 + q) / a - q / b
    if prec <= 0.0:
        return DivergenceEstimate(INF)
    log_mass = 0.5 * d * (-(1.0 + q) * math.log(a) + q * math.log(b) - math.log(prec))
    return DivergenceEstimate(c * kappa**2 * (d / prec) * math.exp(log_mass))


def _require_smooth(phi):
    if not phi.smooth:
        raise PreconditionError(f"phi {phi.name!r} is not twice differentiable")


def _as_points(samples):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] == 0:
        raise PreconditionError("empty sample set")
    return samples


def _summarize(values, kind):
    n = values.shape[0]
    finite = np.isfinite(values)
    n_bad = int(n - finite.sum())
    if n_bad:
        mean = INF if np.any(values == INF) and not np.any(np.isnan(values)) else math.nan
        return DivergenceEstimate(mean, math.nan, n, kind, n_bad)
    mean = math.fsum(values) / n
    if n > 1:
        var = math.fsum((values - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = math.nan
    return DivergenceEstimate(mean, se, n, kind, 0)


def mc_phi_divergence(phi, log_ratio, nu_samples) -> DivergenceEstimate:
    """Monte Carlo ``E_nu[Phi(exp(log_ratio))]`` from i.i.d. samples of ``nu``.

    ``log_ratio`` must be the log ratio of normalized densities. Non-finite
    terms are counted in ``n_nonfinite`` and make the value non-finite.
    """
    phi = as_phi(phi)
    x = _as_points(nu_samples)
    with np.errstate(over="ignore"):
        r = np.exp(np.asarray(log_ratio(x), dtype=np.float64))
    return _summarize(np.asarray(phi.value(r), dtype=np.float64), "monte_carlo")


def mc_phi_fisher_info(phi, log_ratio, score_diff, mu_samples) -> DivergenceEstimate:
    """Monte Carlo ``E_mu[r Phi''(r) |grad log r|^2]`` with ``r = dmu/dnu``.

    This is the Phi-Fisher information written under ``mu`` instead of
    ``nu``. Evaluated at ``g = dmu/dnu`` it is also the Dirichlet form of
    ``g`` with respect to ``nu``.
    """
    phi = as_phi(phi)
    _require_smooth(phi)
    x = _as_points(mu_samples)
    with np.errstate(over="ignore", invalid="ignore"):
        r = np.exp(np.asarray(log_ratio(x), dtype=np.float64))
        s = np.asarray(score_diff(x), dtype=np.float64).reshape(x.shape)
        vals = r * np.asarray(phi.d2(r), dtype=np.float64) * np.sum(s * s, axis=-1)
    return _summarize(vals, "monte_carlo")


def phi_entropy(phi, g_values, weights) -> float:
    """``sum w_i Phi(g_i) - Phi(sum w_i g_i)``."""
    phi = as_phi(phi)
    g = np.asarray(g_values, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if g.shape != w.shape:
        raise PreconditionError("g_values and weights differ in length")
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
        raise PreconditionError("weights must be nonnegative and sum to 1")
    if np.any(g < 0):
        raise PreconditionError("g_values must be nonnegative")
    mean_g = math.fsum(w * g)
    return math.fsum(w * phi.value(g)) - float(phi.value(mean_g))
