"""Certified lower bounds on Phi-Sobolev constants.

Bounds are built from a strong log-concavity certificate or a Gaussian and
then transported through Lipschitz pushforwards, convolutions and the ULA
biased limit. Each bound keeps the list of rules that produced it so a
report can show where a constant came from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import PreconditionError, StepSizeError
from .phi import GaussianSpec, as_phi, gaussian_phi_divergence, gaussian_phi_fisher_info

RULES = ("slc", "pushforward", "convolution", "biased_limit", "gaussian")


@dataclass(frozen=True)
class TraceEntry:
    rule: str
    inputs: dict
    result: float
    note: str = ""


@dataclass(frozen=True)
class PhiSobolevBound:
    """``alpha_lower <= alpha_PhiSI(nu)``; ``math.inf`` is allowed (point masses)."""

    alpha_lower: float
    trace: tuple[TraceEntry, ...]
    exactness: str = "lower_bound"

    def __post_init__(self):
        if not self.alpha_lower >= 0:
            raise PreconditionError(f"alpha_lower must be >= 0, got {self.alpha_lower}")
        if not self.trace:
            raise PreconditionError("a bound needs at least one trace entry")
        if self.exactness not in ("lower_bound", "exact"):
            raise PreconditionError(f"bad exactness {self.exactness!r}")
        for entry in self.trace:
            if entry.rule not in RULES:
                raise PreconditionError(f"unknown rule {entry.rule!r}")

    def __float__(self):
        return float(self.alpha_lower)

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha_lower": _json_float(self.alpha_lower),
                "exactness": self.exactness,
                "trace": [
                    {
                        "rule": t.rule,
                        "inputs": {k: _json_float(v) for k, v in t.inputs.items()},
                        "result": _json_float(t.result),
                        "note": t.note,
                    }
                    for t in self.trace
                ],
            },
            sort_keys=True,
        )


def _json_float(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def point_mass_bound() -> PhiSobolevBound:
    """The ``+inf`` bound of a Dirac mass (zero-variance Gaussian)."""
    return PhiSobolevBound(math.inf, (TraceEntry("gaussian", {"variance": 0.0}, math.inf),))


def bound_from_slc(alpha: float) -> PhiSobolevBound:
    """alpha-strongly log-concave measures satisfy PhiSI with constant alpha."""
    if not alpha > 0:
        raise PreconditionError(f"strong log-concavity modulus must be > 0, got {alpha}")
    return PhiSobolevBound(alpha, (TraceEntry("slc", {"alpha": alpha}, alpha),))


def bound_pushforward(b: PhiSobolevBound, gamma: float) -> PhiSobolevBound:
    """Pushforward under a gamma-Lipschitz map: ``alpha / gamma**2``."""
    if not gamma > 0:
        raise PreconditionError(f"Lipschitz constant must be > 0, got {gamma}")
    value = b.alpha_lower / gamma**2
    entry = TraceEntry("pushforward", {"alpha": b.alpha_lower, "gamma": gamma}, value)
    return PhiSobolevBound(value, b.trace + (entry,))


def bound_convolution(b1: PhiSobolevBound, b2: PhiSobolevBound) -> PhiSobolevBound:
    """Convolution: inverse constants add (harmonic combination)."""
    x, y = b1.alpha_lower, b2.alpha_lower
    inputs = {"alpha_1": x, "alpha_2": y}
    if x == 0 or y == 0:
        entry = TraceEntry("convolution", inputs, 0.0, note="warning: zero input bound")
        return PhiSobolevBound(0.0, b1.trace + b2.trace + (entry,))
    value = 1.0 / (1.0 / x + 1.0 / y)
    return PhiSobolevBound(value, b1.trace + b2.trace + (TraceEntry("convolution", inputs, value),))


def bound_ula_biased_limit(alpha: float, L: float, eta: float) -> PhiSobolevBound:
    """Bound for the ULA stationary law: ``alpha (2 - alpha eta) / 2 >= alpha / 2``."""
    if not 0 < alpha <= L:
        raise PreconditionError(f"need 0 < alpha <= L, got alpha={alpha}, L={L}")
    if not eta > 0:
        raise PreconditionError(f"step size must be > 0, got {eta}")
    if eta > 1.0 / L:
        raise StepSizeError(f"step size {eta} exceeds 1/L = {1.0 / L}")
    value = alpha * (2.0 - alpha * eta) / 2.0
    entry = TraceEntry("biased_limit", {"alpha": alpha, "L": L, "eta": eta}, value)
    return PhiSobolevBound(value, (entry,))


def gaussian_phi_si_constant(g: GaussianSpec) -> PhiSobolevBound:
    """``1 / variance`` for ``N(0, variance I)``, flagged exact."""
    value = 1.0 / g.variance
    entry = TraceEntry("gaussian", {"variance": g.variance, "d": g.d}, value)
    return PhiSobolevBound(value, (entry,), exactness="exact")


@dataclass(frozen=True)
class PhiSIReport:
    divergence: float
    fisher_info: float
    ratio: float  # FI / (2 D); math.nan when D = 0
    alpha_lower: float
    passed: bool
    vacuous: bool
    note: str = field(default="")


def verify_phi_si(phi, mu: GaussianSpec, nu: GaussianSpec, bound: PhiSobolevBound, rtol=0.0) -> PhiSIReport:
    """Check ``2 alpha D_phi(mu || nu) <= FI_phi(mu || nu)`` for a Gaussian pair.

    ``rtol`` loosens the comparison relative to the left side.
    """
    phi = as_phi(phi)
    if not phi.smooth:
        raise PreconditionError(f"phi {phi.name!r} is not twice differentiable")
    div = gaussian_phi_divergence(phi, mu, nu).value
    fi = gaussian_phi_fisher_info(phi, mu, nu).value
    alpha = bound.alpha_lower
    if math.isinf(div):
        return PhiSIReport(div, fi, math.nan, alpha, True, True, "divergence is +inf; check vacuous")
    if div == 0.0:
        return PhiSIReport(div, fi, math.nan, alpha, fi >= 0.0, True, "mu = nu; 0 <= 0")
    ratio = fi / (2.0 * div)
    lhs = 2.0 * alpha * div
    return PhiSIReport(div, fi, ratio, alpha, fi >= lhs * (1.0 - rtol), False)
