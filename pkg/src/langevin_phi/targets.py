"""Targets ``nu ~ exp(-f)`` with certified convexity and smoothness moduli."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .rng import TAG_USER, RngStream

# numba kernel selector; potentials without one run on the numpy path
KIND_GAUSSIAN = 0
KIND_COSINE = 1


@dataclass(frozen=True)
class Potential:
    """A potential ``f`` (known up to an additive constant) and its gradient.

    ``f`` and ``grad_f`` act on the last axis, so a ``(n, d)`` batch maps to
    ``(n,)`` and ``(n, d)``. ``kind``/``param`` identify the built-in
    families to the compiled kernels and are ``None`` for user potentials.
    """

    f: Callable = field(repr=False)
    grad_f: Callable = field(repr=False)
    alpha: float
    L: float
    d: int
    exact_sampler_available: bool = False
    name: str = "custom"
    kind: int | None = None
    param: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise PreconditionError(f"dimension must be >= 1, got {self.d}")
        if not (self.L > 0 and self.alpha >= 0 and self.alpha <= self.L):
            raise PreconditionError(f"need 0 <= alpha <= L and L > 0, got alpha={self.alpha}, L={self.L}")

    @property
    def variance(self) -> float:
        """Variance of an isotropic Gaussian target."""
        if self.kind != KIND_GAUSSIAN:
            raise PreconditionError(f"potential {self.name!r} is not Gaussian")
        return self.param


def make_gaussian_potential(variance: float, d: int) -> Potential:
    """``f(x) = |x|^2 / (2 variance)``, the Ornstein-Uhlenbeck target."""
    if not variance > 0:
        raise PreconditionError(f"variance must be > 0, got {variance}")
    inv = 1.0 / variance

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * inv * np.sum(x * x, axis=-1)

    def grad_f(x):
        return inv * np.asarray(x, dtype=np.float64)

    return Potential(f, grad_f, inv, inv, d, True, "gaussian", KIND_GAUSSIAN, float(variance))


def make_cosine_perturbed(epsilon: float, d: int) -> Potential:
    """``f(x) = |x|^2 / 2 + epsilon * sum cos(x_i)``; Hessian in ``[1 - eps, 1 + eps]``."""
    if not 0 <= epsilon < 1:
        raise PreconditionError(f"epsilon must lie in [0, 1), got {epsilon}")

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return np.sum(0.5 * x * x + epsilon * np.cos(x), axis=-1)

    def grad_f(x):
        x = np.asarray(x, dtype=np.float64)
        return x - epsilon * np.sin(x)

    if epsilon == 0:
        return make_gaussian_potential(1.0, d)
    return Potential(f, grad_f, 1.0 - epsilon, 1.0 + epsilon, d, False, "cosine", KIND_COSINE, float(epsilon))


def make_potential(name: str, d: int, **params) -> Potential:
    """Build a potential by CLI-config name."""
    allowed = {"gaussian": {"variance"}, "cosine": {"epsilon"}}
    if name not in allowed:
        raise PreconditionError(f"unknown target {name!r}; valid: gaussian, cosine")
    extra = set(params) - allowed[name]
    if extra:
        raise PreconditionError(f"unknown parameters for target {name!r}: {sorted(extra)}")
    if name == "gaussian":
        return make_gaussian_potential(params.get("variance", 1.0), d)
    return make_cosine_perturbed(params.get("epsilon", 0.5), d)


@dataclass
class PotentialReport:
    passed: bool
    max_gradient_error: float
    min_convexity_ratio: float
    max_smoothness_ratio: float
    failures: list = field(default_factory=list)


def check_potential(p: Potential, n_points: int, rng, h: float = 1e-5, scale=2.0) -> PotentialReport:
    """Finite-difference and secant checks of ``(f, grad_f, alpha, L)``.

    Gradient error is ``|grad - FD| / (1 + |grad|)`` with central
    differences; the secant ratios are ``<g(x)-g(y), x-y> / |x-y|^2`` over
    random pairs and must land in ``[alpha, L]``.
    """
    if n_points < 1:
        raise PreconditionError("n_points must be >= 1")
    if isinstance(rng, RngStream):
        idx = np.arange(n_points)
        x = scale * rng.normals(TAG_USER, idx, 0, p.d)
        y = scale * rng.normals(TAG_USER, idx, 1, p.d)
    else:
        x = scale * rng.standard_normal((n_points, p.d))
        y = scale * rng.standard_normal((n_points, p.d))
    grads = p.grad_f(x)
    fd = np.empty_like(x)
    for j in range(p.d):
        e = np.zeros(p.d)
        e[j] = h
        fd[:, j] = (p.f(x + e) - p.f(x - e)) / (2.0 * h)
    gerr = np.linalg.norm(grads - fd, axis=1) / (1.0 + np.linalg.norm(grads, axis=1))
    diff = x - y
    secant = np.sum((p.grad_f(x) - p.grad_f(y)) * diff, axis=1) / np.sum(diff * diff, axis=1)
    report = PotentialReport(True, float(gerr.max()), float(secant.min()), float(secant.max()))
    slack = 1e-12
    if report.max_gradient_error > 1e-3:
        report.failures.append(f"finite-difference gradient error {report.max_gradient_error:.3g} > 1e-3")
    if p.alpha > 0 and report.min_convexity_ratio < p.alpha * (1 - slack) - slack:
        report.failures.append(f"secant ratio {report.min_convexity_ratio:.6g} below alpha={p.alpha}")
    if report.max_smoothness_ratio > p.L * (1 + slack) + slack:
        report.failures.append(f"secant ratio {report.max_smoothness_ratio:.6g} above L={p.L}")
    report.passed = not report.failures
    return report


def shifted(p: Potential, constant: float) -> Potential:
    """``f + constant``; same gradient, same kernels."""
    f = p.f
    return Potential(lambda x: f(x) + constant, p.grad_f, p.alpha, p.L, p.d, p.exact_sampler_available,
                     p.name, p.kind, p.param)
