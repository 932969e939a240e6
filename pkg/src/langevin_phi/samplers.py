"""ULA and the proximal sampler on particle ensembles.

Particle ``i`` at step ``k`` draws its noise from the counter address
``(i, k)`` under a per-use tag, so trajectories depend only on the seed and
the configuration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend, _kernels
from .errors import PreconditionError, RGOError, StepSizeError
from .phi import GaussianSpec, as_phi, gaussian_phi_divergence
from .rng import (
    TAG_FORWARD,
    TAG_INIT,
    TAG_RGO_ACCEPT,
    TAG_RGO_EXACT,
    TAG_RGO_PROPOSAL,
    TAG_ULA,
    RngStream,
)
from .targets import Potential


@dataclass(frozen=True)
class Ensemble:
    particles: np.ndarray
    step: int = 0

    def __post_init__(self):
        x = np.asarray(self.particles, dtype=np.float64)
        if x.ndim != 2:
            raise PreconditionError(f"particles must be an (n, d) array, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise PreconditionError("ensemble has non-finite coordinates")
        if self.step < 0:
            raise PreconditionError("step must be >= 0")
        object.__setattr__(self, "particles", x)

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @property
    def d(self) -> int:
        return self.particles.shape[1]

    @classmethod
    def from_gaussian(cls, spec: GaussianSpec, n: int, rng: RngStream) -> "Ensemble":
        z = rng.normals(TAG_INIT, np.arange(n), 0, spec.d)
        return cls(math.sqrt(spec.variance) * z, 0)


@dataclass
class RgoStats:
    calls: int = 0
    total_proposals: int = 0
    max_proposals_single_call: int = 0
    optimizer_iters_total: int = 0

    def merge(self, other: "RgoStats") -> "RgoStats":
        """Associative combination of two partial counts."""
        return RgoStats(
            self.calls + other.calls,
            self.total_proposals + other.total_proposals,
            max(self.max_proposals_single_call, other.max_proposals_single_call),
            self.optimizer_iters_total + other.optimizer_iters_total,
        )

    def absorb(self, other: "RgoStats") -> None:
        merged = self.merge(other)
        self.__dict__.update(merged.__dict__)

    @property
    def mean_proposals(self) -> float:
        return self.total_proposals / self.calls if self.calls else math.nan


@dataclass
class Trajectory:
    records: list
    final: Ensemble
    rgo_stats: RgoStats | None = None


# --------------------------------------------------------------------------
# recording hooks


def ensemble_variance(e: Ensemble) -> tuple[float, float]:
    """Isotropic variance fit ``mean |x|^2 / d`` and its standard error."""
    per = np.sum(e.particles**2, axis=1) / e.d
    mean = float(np.mean(per))
    se = float(np.std(per, ddof=1) / math.sqrt(e.n)) if e.n > 1 else math.nan
    return mean, se


def marginal_shape(e: Ensemble) -> dict:
    """Per-coordinate skewness and excess kurtosis with their Gaussian-null SEs."""
    x = e.particles - e.particles.mean(axis=0)
    m2 = np.mean(x**2, axis=0)
    skew = np.mean(x**3, axis=0) / m2**1.5
    kurt = np.mean(x**4, axis=0) / m2**2 - 3.0
    return {
        "skewness": skew,
        "excess_kurtosis": kurt,
        "skewness_se": math.sqrt(6.0 / e.n),
        "kurtosis_se": math.sqrt(24.0 / e.n),
    }


def moment_recorder(e: Ensemble) -> dict:
    var, se = ensemble_variance(e)
    return {"k": e.step, "variance": var, "variance_se": se}


def gaussian_fit_recorder(reference: GaussianSpec, phi="kl") -> Callable[[Ensemble], dict]:
    """Hook fitting ``N(0, s I)`` to the ensemble and scoring it against ``reference``.

    The divergence standard error is the variance SE pushed through the
    closed form by a central difference.
    """
    phi = as_phi(phi)

    def div(s):
        return gaussian_phi_divergence(phi, GaussianSpec(reference.d, s), reference).value

    def record(e: Ensemble) -> dict:
        s, se = ensemble_variance(e)
        h = 1e-6 * s
        slope = (div(s + h) - div(s - h)) / (2.0 * h)
        value = div(s)
        return {
            "k": e.step,
            "variance": s,
            "variance_se": se,
            "divergence": value,
            "divergence_se": abs(slope) * se if math.isfinite(value) else math.nan,
        }

    return record


# --------------------------------------------------------------------------
# ULA


def _check_eta(eta, L, allow_large_step):
    if not eta > 0:
        raise PreconditionError(f"step size must be > 0, got {eta}")
    if eta > 1.0 / L:
        msg = f"step size {eta} exceeds 1/L = {1.0 / L}"
        if not allow_large_step:
            raise StepSizeError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def ula_step(e: Ensemble, p: Potential, eta: float, rng: RngStream, *,
             allow_large_step=False, noise=None) -> Ensemble:
    """``x <- x - eta grad_f(x) + sqrt(2 eta) z`` for every particle.

    ``noise`` overrides the standard normal draws (shape ``(n, d)``).
    """
    _check_eta(eta, p.L, allow_large_step)
    grad = p.grad_f(e.particles)
    if not np.all(np.isfinite(grad)):
        raise PreconditionError("non-finite gradient")
    z = rng.normals(TAG_ULA, np.arange(e.n), e.step, e.d) if noise is None else np.asarray(noise)
    return Ensemble(e.particles - eta * grad + math.sqrt(2.0 * eta) * z.reshape(e.particles.shape), e.step + 1)


def _init_ensemble(init, n, rng):
    if isinstance(init, Ensemble):
        return init
    if isinstance(init, GaussianSpec):
        if n is None or n < 1:
            raise PreconditionError("n must be >= 1 when initializing from a Gaussian")
        return Ensemble.from_gaussian(init, n, rng)
    raise PreconditionError(f"init must be a GaussianSpec or Ensemble, got {type(init).__name__}")


def ula_run(init, p: Potential, eta: float, k_max: int, n: int | None, rng: RngStream,
            record=moment_recorder, *, allow_large_step=False) -> Trajectory:
    """Iterate :func:`ula_step` ``k_max`` times, recording at every step (k = 0 included)."""
    _check_eta(eta, p.L, allow_large_step)
    e = _init_ensemble(init, n, rng)
    records = [record(e)] if record else []
    for _ in range(k_max):
        e = ula_step(e, p, eta, rng, allow_large_step=allow_large_step)
        if record:
            records.append(record(e))
    return Trajectory(records, e)


# --------------------------------------------------------------------------
# proximal sampler


def proximal_forward_step(e: Ensemble, eta: float, rng: RngStream, *, noise=None) -> Ensemble:
    """``y = x + sqrt(eta) z``: a draw from ``N(x, eta I)``; the step counter is kept."""
    if not eta > 0:
        raise PreconditionError(f"step size must be > 0, got {eta}")
    z = rng.normals(TAG_FORWARD, np.arange(e.n), e.step, e.d) if noise is None else np.asarray(noise)
    return Ensemble(e.particles + math.sqrt(eta) * z.reshape(e.particles.shape), e.step)


def _as_rows(y):
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    return (y[None, :] if single else y), single


def rgo_exact_gaussian(y, variance: float, eta: float, rng: RngStream, *, step=0, particles=None):
    """Exact draw from ``exp(-|x|^2/(2 variance) - |x-y|^2/(2 eta))``.

    That is ``N(y variance/(variance+eta), variance eta/(variance+eta) I)``.
    ``y`` may be one point or an ``(n, d)`` batch.
    """
    if not (variance > 0 and eta > 0):
        raise PreconditionError("variance and eta must be > 0")
    rows, single = _as_rows(y)
    ids = np.arange(rows.shape[0]) if particles is None else np.asarray(particles)
    z = rng.normals(TAG_RGO_EXACT, ids, step, rows.shape[1])
    mean = rows * (variance / (variance + eta))
    out = mean + math.sqrt(variance * eta / (variance + eta)) * z
    return out[0] if single else out


def rgo_rejection(y, p: Potential, eta: float, rng: RngStream, opt_tol: float | None = None,
                  max_proposals: int = 100_000, stats: RgoStats | None = None, *,
                  step=0, particles=None, max_iter=10_000, branch="strongly_convex", backend=None):
    """Rejection-sampling RGO for ``exp(-f(x) - |x-y|^2/(2 eta))``.

    Uses ``beta = alpha + 1/eta`` and ``M = L + 1/eta``, so the expected
    number of proposals is at most ``(M/beta)^(d/2)``. ``stats`` (if given)
    is updated in place. Only the strongly convex branch is implemented:
    the merely-smooth branch would use ``beta = 1/eta - L`` and needs
    ``eta < 1/L`` for ``beta > 0``.
    """
    if branch != "strongly_convex":
        raise NotImplementedError("only the strongly convex branch (alpha > 0) is implemented")
    if not p.alpha > 0:
        raise PreconditionError("rejection RGO needs a strongly convex potential (alpha > 0)")
    if not 0 < eta < 1.0 / p.L:
        raise StepSizeError(f"rejection RGO needs 0 < eta < 1/L = {1.0 / p.L}, got {eta}")
    if max_proposals < 1:
        raise PreconditionError("max_proposals must be >= 1")
    rows, single = _as_rows(y)
    n, d = rows.shape
    if d != p.d:
        raise PreconditionError(f"point dimension {d} does not match potential dimension {p.d}")
    if opt_tol is None:
        opt_tol = 1e-10 * math.sqrt(d)
    ids = np.ascontiguousarray(np.arange(n) if particles is None else particles, dtype=np.int64)
    beta = p.alpha + 1.0 / eta
    big_m = p.L + 1.0 / eta
    backend = backend or _backend.BACKEND
    if backend == "numba" and p.kind in _kernels.SUPPORTED_KINDS:
        kp0, kp1 = rng.key(TAG_RGO_PROPOSAL)
        ka0, ka1 = rng.key(TAG_RGO_ACCEPT)
        out, props, iters, status = _kernels.rgo_rejection_numba(
            np.ascontiguousarray(rows), ids, np.int64(step), np.int64(p.kind), float(p.param),
            float(eta), float(beta), float(big_m), kp0, kp1, ka0, ka1, float(opt_tol),
            np.int64(max_iter), np.int64(max_proposals),
        )
    else:
        out, props, iters, status = _kernels.rgo_rejection_numpy(
            rows, ids, step, p, eta, beta, big_m, rng, TAG_RGO_PROPOSAL, TAG_RGO_ACCEPT,
            opt_tol, max_iter, max_proposals,
        )
    call_stats = RgoStats(
        calls=n,
        total_proposals=int(props.sum()),
        max_proposals_single_call=int(props.max()) if n else 0,
        optimizer_iters_total=int(iters.sum()),
    )
    if stats is not None:
        stats.absorb(call_stats)
    if np.any(status == _kernels.STALLED):
        raise RGOError(f"optimizer stalled on {int(np.sum(status == _kernels.STALLED))} rows", call_stats)
    if np.any(status == _kernels.EXHAUSTED):
        raise RGOError(f"proposal budget {max_proposals} exhausted", call_stats)
    return out[0] if single else out


def proximal_run(init, p: Potential, eta: float, k_max: int, n: int | None, rgo: str, rng: RngStream,
                 record=moment_recorder, *, opt_tol=None, max_proposals=100_000) -> Trajectory:
    """Alternate the Gaussian forward step with an RGO backward step.

    ``rgo`` is ``"exact"`` (Gaussian targets only) or ``"rejection"``.
    """
    if not eta > 0:
        raise PreconditionError(f"step size must be > 0, got {eta}")
    if rgo == "exact":
        if not p.exact_sampler_available:
            raise PreconditionError(f"exact RGO unavailable for target {p.name!r}")
        variance = p.variance
    elif rgo == "rejection":
        if not 0 < eta < 1.0 / p.L:
            raise StepSizeError(f"rejection RGO needs eta < 1/L = {1.0 / p.L}, got {eta}")
    else:
        raise PreconditionError(f"unknown rgo {rgo!r}; valid: exact, rejection")
    e = _init_ensemble(init, n, rng)
    stats = RgoStats() if rgo == "rejection" else None
    records = [record(e)] if record else []
    ids = np.arange(e.n)
    for _ in range(k_max):
        y = proximal_forward_step(e, eta, rng)
        if rgo == "exact":
            x = rgo_exact_gaussian(y.particles, variance, eta, rng, step=e.step, particles=ids)
        else:
            x = rgo_rejection(y.particles, p, eta, rng, opt_tol, max_proposals, stats,
                              step=e.step, particles=ids)
        e = Ensemble(x, e.step + 1)
        if record:
            records.append(record(e))
    return Trajectory(records, e, stats)


__all__ = [
    "Ensemble",
    "RgoStats",
    "Trajectory",
    "ensemble_variance",
    "gaussian_fit_recorder",
    "marginal_shape",
    "moment_recorder",
    "proximal_forward_step",
    "proximal_run",
    "rgo_exact_gaussian",
    "rgo_rejection",
    "ula_run",
    "ula_step",
]

