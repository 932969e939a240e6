"""Config-driven experiments and their CSV/JSON reports."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import subprocess
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__
from .analytics import (
    OuConfig,
    contraction_bound_proximal,
    contraction_bound_ula,
    ou_langevin,
    ou_proximal_variance,
    ou_ula_biased_variance,
    ou_ula_kl,
    ou_ula_variance,
    ou_proximal_kl,
    theorem_bound,
)
from .errors import PreconditionError
from .isoperimetry import bound_from_slc, bound_ula_biased_limit
from .phi import GaussianSpec, gaussian_phi_divergence, phi_registry
from .rng import RngStream
from .samplers import (
    Ensemble,
    RgoStats,
    ensemble_variance,
    gaussian_fit_recorder,
    moment_recorder,
    proximal_forward_step,
    proximal_run,
    rgo_exact_gaussian,
    rgo_rejection,
    ula_run,
    ula_step,
)
from .targets import make_potential

EXPERIMENTS = ("analytic", "simulate_ula", "simulate_proximal", "contraction_sweep", "rgo_check", "langevin_limit")
QUANTITIES = ("kl", "chi2", "variance", "contraction_ratio", "rgo_iters", "mean")
CSV_HEADER = ("k", "quantity", "analytic", "empirical", "std_error", "theoretical_bound")
SWEEP_KERNELS = ("ula", "proximal_forward", "proximal_full")

DEFAULT_VARIANCE_GRID = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)
DEFAULT_Y_GRID = (-3.0, -2.0, -1.0, 0.0, 0.7, 2.0, 3.0)


class ConfigError(ValueError):
    """The experiment configuration could not be parsed or validated."""


@dataclass
class ExperimentConfig:
    experiment: str
    target: dict = field(default_factory=lambda: {"name": "gaussian"})
    phi: str = "kl"
    alpha: float | None = None
    L: float | None = None
    eta: float = 0.1
    d: int = 1
    c0: float = 1.0
    k_max: int = 20
    n_particles: int = 10_000
    seed: int = 0
    output_path: str = "results.csv"
    kernel: str = "ula"
    rgo: str = "exact"
    grid: list | None = None
    t_grid: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    n_halvings: int = 3
    allow_large_step: bool = False
    opt_tol: float | None = None
    max_proposals: int = 100_000

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "experiment" not in raw:
            raise ConfigError("missing required key 'experiment'")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        def positive(name, integer=False, allow_none=False):
            v = getattr(self, name)
            if v is None and allow_none:
                return
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name} must be a number, got {v!r}")
            if integer and int(v) != v:
                raise ConfigError(f"{name} must be an integer, got {v!r}")
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive, got {v!r}")

        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; valid: {', '.join(EXPERIMENTS)}")
        if not isinstance(self.target, dict) or "name" not in self.target:
            raise ConfigError("target must be an object with a 'name'")
        try:
            phi_registry(self.phi)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        if self.phi not in ("kl", "chi2"):
            raise ConfigError("experiments report kl or chi2 only")
        for name in ("eta", "c0"):
            positive(name)
        for name in ("alpha", "L", "opt_tol"):
            positive(name, allow_none=True)
        for name in ("d", "n_particles", "max_proposals", "n_halvings"):
            positive(name, integer=True)
        if isinstance(self.k_max, bool) or not isinstance(self.k_max, int) or self.k_max < 0:
            raise ConfigError(f"k_max must be a nonnegative integer, got {self.k_max!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if not isinstance(self.output_path, str) or not self.output_path:
            raise ConfigError("output_path must be a non-empty string")
        valid_kernels = ("ula", "proximal") + SWEEP_KERNELS
        if self.kernel not in valid_kernels:
            raise ConfigError(f"unknown kernel {self.kernel!r}; valid: {', '.join(valid_kernels)}")
        if self.rgo not in ("exact", "rejection"):
            raise ConfigError(f"unknown rgo {self.rgo!r}; valid: exact, rejection")
        for name in ("grid", "t_grid"):
            v = getattr(self, name)
            if v is None and name == "grid":
                continue
            if not isinstance(v, list) or not v or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v
            ):
                raise ConfigError(f"{name} must be a non-empty list of numbers")
        if self.experiment != "rgo_check" and self.grid is not None and any(x <= 0 for x in self.grid):
            raise ConfigError("variance grid entries must be positive")
        if any(t < 0 for t in self.t_grid):
            raise ConfigError("t_grid entries must be nonnegative")
        if not isinstance(self.allow_large_step, bool):
            raise ConfigError("allow_large_step must be a boolean")


@dataclass
class ResultRow:
    k: int
    quantity: str
    analytic: float | None = None
    empirical: float | None = None
    std_error: float | None = None
    theoretical_bound: float | None = None

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        if self.analytic is None and self.empirical is None:
            raise ValueError("a row needs an analytic or an empirical value")


@dataclass
class ExperimentResult:
    rows: list
    labels: list
    notes: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# setup helpers


def _target(cfg: ExperimentConfig):
    params = {k: v for k, v in cfg.target.items() if k != "name"}
    name = cfg.target["name"]
    if name == "gaussian" and "variance" not in params:
        params["variance"] = 1.0 / cfg.alpha if cfg.alpha else 1.0
    p = make_potential(name, cfg.d, **params)
    if name == "gaussian" and cfg.alpha is not None and not math.isclose(cfg.alpha, p.alpha, rel_tol=1e-12):
        raise PreconditionError(f"alpha={cfg.alpha} disagrees with target variance {p.variance}")
    if cfg.L is not None and cfg.L < p.L * (1 - 1e-12):
        raise PreconditionError(f"L={cfg.L} is below the target's smoothness modulus {p.L}")
    return p


def _ou(cfg: ExperimentConfig, p) -> OuConfig:
    return OuConfig(p.alpha, cfg.eta, cfg.d, cfg.c0)


def _div(phi, a, b, d):
    return gaussian_phi_divergence(phi, GaussianSpec(d, a), GaussianSpec(d, b)).value


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


# --------------------------------------------------------------------------
# experiments


def run_analytic(cfg: ExperimentConfig) -> ExperimentResult:
    p = _target(cfg)
    if p.kind != 0:
        raise PreconditionError("analytic experiment needs a Gaussian target")
    ou = _ou(cfg, p)
    rows, labels = [], []
    if cfg.kernel == "ula":
        L = cfg.L or p.L
        ref = ou_ula_biased_variance(ou)
        alpha_si = bound_ula_biased_limit(p.alpha, L, cfg.eta).alpha_lower
        variance = lambda k: ou_ula_variance(ou, k)  # noqa: E731
        kl = lambda k: ou_ula_kl(ou, k)  # noqa: E731
        bound_kind = "ula"
    elif cfg.kernel == "proximal":
        L = None
        ref = 1.0 / p.alpha
        alpha_si = bound_from_slc(p.alpha).alpha_lower
        variance = lambda k: ou_proximal_variance(ou, k)  # noqa: E731
        kl = lambda k: ou_proximal_kl(ou, k)  # noqa: E731
        bound_kind = "proximal"
    else:
        raise PreconditionError("analytic experiment supports kernel ula or proximal")
    d0 = kl(0) if cfg.phi == "kl" else _div(cfg.phi, cfg.c0, ref, cfg.d)
    for k in range(cfg.k_max + 1):
        c = variance(k)
        rows.append(ResultRow(k, "variance", analytic=c))
        labels.append({"k": k})
        value = kl(k) if cfg.phi == "kl" else _div(cfg.phi, c, ref, cfg.d)
        bound = theorem_bound(bound_kind, alpha_si, L, cfg.eta, k, d0) if math.isfinite(d0) else None
        rows.append(ResultRow(k, cfg.phi, analytic=_finite(value), theoretical_bound=bound,
                              empirical=None if math.isfinite(value) else math.inf))
        labels.append({"k": k})
    notes = {"reference_variance": ref, "alpha_si": alpha_si}
    if cfg.kernel == "ula":
        # the ULA bound for nu^eta can be read with either constant; report both
        notes["alpha_si_candidates"] = {
            "biased_limit_bound": p.alpha * (2 - p.alpha * cfg.eta) / 2,
            "doubled": p.alpha * (2 - p.alpha * cfg.eta),
        }
    return ExperimentResult(rows, labels, notes)


def _simulate(cfg: ExperimentConfig, chain: str) -> ExperimentResult:
    p = _target(cfg)
    rng = RngStream(cfg.seed)
    gaussian = p.kind == 0
    init = GaussianSpec(cfg.d, cfg.c0)
    ou = _ou(cfg, p) if gaussian else None
    if chain == "ula":
        L = cfg.L or p.L
        if gaussian:
            ref = ou_ula_biased_variance(ou)
            alpha_si = None
            if cfg.eta <= 1.0 / L:
                alpha_si = bound_ula_biased_limit(p.alpha, L, cfg.eta).alpha_lower
    else:
        if gaussian:
            ref = 1.0 / p.alpha
            alpha_si = p.alpha
    record = gaussian_fit_recorder(GaussianSpec(cfg.d, ref), cfg.phi) if gaussian else moment_recorder
    if chain == "ula":
        traj = ula_run(init, p, cfg.eta, cfg.k_max, cfg.n_particles, rng, record,
                       allow_large_step=cfg.allow_large_step)
    else:
        traj = proximal_run(init, p, cfg.eta, cfg.k_max, cfg.n_particles, cfg.rgo, rng, record,
                            opt_tol=cfg.opt_tol, max_proposals=cfg.max_proposals)
    rows, labels = [], []
    d0 = _div(cfg.phi, cfg.c0, ref, cfg.d) if gaussian else None
    for rec in traj.records:
        k = rec["k"]
        analytic_var = None
        if gaussian:
            analytic_var = ou_ula_variance(ou, k) if chain == "ula" else ou_proximal_variance(ou, k)
        rows.append(ResultRow(k, "variance", analytic_var, rec["variance"], rec["variance_se"]))
        labels.append({"k": k})
        if gaussian:
            if cfg.phi == "kl":
                a = ou_ula_kl(ou, k) if chain == "ula" else ou_proximal_kl(ou, k)
            else:
                a = _div(cfg.phi, analytic_var, ref, cfg.d)
            bound = None
            if math.isfinite(d0) and alpha_si is not None:
                bound = theorem_bound(chain, alpha_si, L if chain == "ula" else None, cfg.eta, k, d0)
            rows.append(ResultRow(k, cfg.phi, _finite(a), _finite(rec["divergence"]),
                                  _finite(rec["divergence_se"]), bound))
            labels.append({"k": k})
    notes = {}
    if traj.rgo_stats is not None:
        notes["rgo_stats"] = dataclasses.asdict(traj.rgo_stats)
    return ExperimentResult(rows, labels, notes)


def run_simulate_ula(cfg):
    return _simulate(cfg, "ula")


def run_simulate_proximal(cfg):
    return _simulate(cfg, "proximal")


def sweep_ratio(kernel: str, phi, a: float, alpha: float, eta: float, d: int) -> tuple[float, float, float]:
    """Exact ``D(mu P || nu P) / D(mu || nu)`` for ``mu = N(0, a I)``.

    Returns ``(ratio, input_divergence, reference_variance)``; the ratio is
    ``math.inf`` when the output divergence is undefined and ``math.nan`` for
    a 0/0 input (``a`` equal to the reference variance).
    """
    if kernel == "ula":
        ref = 2.0 / (alpha * (2.0 - alpha * eta))
        a_out = (1.0 - alpha * eta) ** 2 * a + 2.0 * eta
        ref_out = ref
    elif kernel == "proximal_forward":
        ref = 1.0 / alpha
        a_out, ref_out = a + eta, ref + eta
    elif kernel == "proximal_full":
        ref = 1.0 / alpha
        a_out = (a + eta) / (1.0 + alpha * eta) ** 2 + eta / (1.0 + alpha * eta)
        ref_out = ref
    else:
        raise PreconditionError(f"unknown sweep kernel {kernel!r}")
    d_in = _div(phi, a, ref, d)
    d_out = _div(phi, a_out, ref_out, d)
    if d_in == 0.0:
        return math.nan, d_in, ref
    if math.isinf(d_in) or math.isinf(d_out):
        return math.inf, d_in, ref
    return d_out / d_in, d_in, ref


def sweep_bound(kernel: str, alpha: float, eta: float) -> float:
    if kernel == "ula":
        alpha_si = bound_ula_biased_limit(alpha, alpha, eta).alpha_lower
        return contraction_bound_ula(alpha_si, alpha, eta)
    c = contraction_bound_proximal(alpha, eta)
    return c.forward if kernel == "proximal_forward" else c.composed


def contraction_sweep(kernel: str, reference: GaussianSpec, inputs, phi, eta: float,
                      n_particles: int = 0, rng: RngStream | None = None):
    """Contraction ratios of a Gaussian kernel over a grid of input variances.

    ``reference`` is the target ``N(0, I/alpha)``; the invariant law the
    ratio is measured against (``nu^eta`` for ULA) follows from it. With
    ``n_particles > 0`` each ratio is also estimated by pushing an
    ensemble through one step and fitting a Gaussian to the output.
    Returns ``(rows, labels, notes)``.
    """
    if kernel == "proximal":
        kernel = "proximal_full"
    alpha = 1.0 / reference.variance
    d = reference.d
    bound = sweep_bound(kernel, alpha, eta)
    rows, labels, skipped, excluded = [], [], [], []
    observed = -math.inf
    potential = make_potential("gaussian", d, variance=reference.variance)
    for idx, a in enumerate(inputs):
        ratio, d_in, ref = sweep_ratio(kernel, phi, a, alpha, eta, d)
        if math.isnan(ratio):
            skipped.append(a)
            continue
        if math.isinf(ratio):
            excluded.append(a)
            warnings.warn(f"divergence undefined at input variance {a}; excluded from sup", RuntimeWarning,
                          stacklevel=2)
            rows.append(ResultRow(idx, "contraction_ratio", empirical=math.inf, theoretical_bound=bound))
            labels.append({"input_variance": a})
            continue
        observed = max(observed, ratio)
        emp = se = None
        if n_particles and rng is not None:
            emp, se = _empirical_ratio(kernel, potential, a, ref, d_in, eta, alpha, phi, n_particles, rng, idx)
        rows.append(ResultRow(idx, "contraction_ratio", ratio, emp, se, bound))
        labels.append({"input_variance": a})
    notes = {
        "kernel": kernel,
        "observed_sup": observed if observed > -math.inf else None,
        "bound": bound,
        "skipped_zero_divergence": skipped,
        "excluded_undefined": excluded,
    }
    return rows, labels, notes


def _empirical_ratio(kernel, potential, a, ref, d_in, eta, alpha, phi, n, rng, idx):
    d = potential.d
    # one independent stream block per grid point
    sub = RngStream((rng.seed + 0x9E3779B97F4A7C15 * (idx + 1)) % 2**64)
    e = Ensemble.from_gaussian(GaussianSpec(d, a), n, sub)
    if kernel == "ula":
        out = ula_step(e, potential, eta, sub)
        ref_out = ref
    elif kernel == "proximal_forward":
        out = proximal_forward_step(e, eta, sub)
        ref_out = ref + eta
    else:
        y = proximal_forward_step(e, eta, sub)
        out = Ensemble(rgo_exact_gaussian(y.particles, 1.0 / alpha, eta, sub, step=0), 1)
        ref_out = ref
    rec = gaussian_fit_recorder(GaussianSpec(d, ref_out), phi)(out)
    return _finite(rec["divergence"] / d_in), _finite(rec["divergence_se"] / d_in)


def run_contraction_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    p = _target(cfg)
    if p.kind != 0:
        raise PreconditionError("contraction sweeps need a Gaussian target")
    kernel = "proximal_full" if cfg.kernel == "proximal" else cfg.kernel
    if kernel not in SWEEP_KERNELS:
        raise PreconditionError(f"contraction_sweep kernel must be one of {SWEEP_KERNELS} (or proximal)")
    if kernel == "ula" and cfg.eta > 1.0 / p.L:
        raise PreconditionError(f"step size {cfg.eta} exceeds 1/L = {1.0 / p.L}")
    grid = cfg.grid if cfg.grid is not None else list(DEFAULT_VARIANCE_GRID)
    rows, labels, notes = contraction_sweep(kernel, GaussianSpec(cfg.d, p.variance), grid, cfg.phi, cfg.eta,
                                            cfg.n_particles, RngStream(cfg.seed))
    return ExperimentResult(rows, labels, notes)


def rgo_conditional_moments(p, y: float, eta: float) -> dict:
    """Mean, variance and expected proposal count of the 1-d RGO target by quadrature.

    Both built-in potentials are separable, so coordinate ``i`` of the RGO
    target only depends on ``y_i``.
    """
    if p.kind == 0:
        f1 = lambda x: 0.5 * x * x / p.param  # noqa: E731
    elif p.kind == 1:
        f1 = lambda x: 0.5 * x * x + p.param * math.cos(x)  # noqa: E731
    else:
        raise PreconditionError("quadrature moments need a separable built-in potential")
    g = lambda x: f1(x) + 0.5 * (x - y) ** 2 / eta  # noqa: E731
    beta = p.alpha + 1.0 / eta
    # coarse minimizer as the centring point; only conditioning depends on it
    center = y / (1.0 + eta)
    for _ in range(200):
        h = 1e-6
        grad = (g(center + h) - g(center - h)) / (2 * h)
        center -= grad / (p.L + 1.0 / eta)
    g0 = g(center)
    width = 12.0 / math.sqrt(beta)
    lo, hi = center - width, center + width
    w = lambda x: math.exp(-(g(x) - g0))  # noqa: E731
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
    z = integrate.quad(w, lo, hi, **opts)[0]
    m1 = integrate.quad(lambda x: x * w(x), lo, hi, **opts)[0] / z
    m2 = integrate.quad(lambda x: (x - m1) ** 2 * w(x), lo, hi, **opts)[0] / z
    m4 = integrate.quad(lambda x: (x - m1) ** 4 * w(x), lo, hi, **opts)[0] / z
    # acceptance probability = Z sqrt(beta/2pi) exp(g(x*) - g0), with g(x*) <= g0
    x_star = center
    accept = z * math.sqrt(beta / (2 * math.pi)) * math.exp(g(x_star) - g0)
    return {"mean": m1, "variance": m2, "central_m4": m4, "accept_prob": accept}


def run_rgo_check(cfg: ExperimentConfig) -> ExperimentResult:
    p = _target(cfg)
    if not p.alpha > 0:
        raise PreconditionError("rgo_check needs a strongly convex target")
    if not cfg.eta < 1.0 / p.L:
        raise PreconditionError(f"rgo_check needs eta < 1/L = {1.0 / p.L}")
    grid = cfg.grid if cfg.grid is not None else list(DEFAULT_Y_GRID)
    rng = RngStream(cfg.seed)
    beta = p.alpha + 1.0 / cfg.eta
    big_m = p.L + 1.0 / cfg.eta
    iter_bound = (big_m / beta) ** (cfg.d / 2)
    n = cfg.n_particles
    rows, labels = [], []
    total = RgoStats()
    for idx, y0 in enumerate(grid):
        stats = RgoStats()
        y = np.full((n, cfg.d), float(y0))
        x = rgo_rejection(y, p, cfg.eta, rng, cfg.opt_tol, cfg.max_proposals, stats, step=idx)
        total.absorb(stats)
        exact = rgo_conditional_moments(p, float(y0), cfg.eta)
        # per-call proposal counts are geometric, so their SE follows from the mean
        mean_props = stats.mean_proposals
        q = 1.0 / mean_props
        props_se = math.sqrt((1 - q) / q**2 / n) if q < 1 else 0.0
        expected_props = exact["accept_prob"] ** (-cfg.d)
        rows.append(ResultRow(idx, "rgo_iters", expected_props, mean_props, props_se, iter_bound))
        flat = x.ravel()
        m = float(np.mean(flat))
        m_se = math.sqrt(exact["variance"] / flat.size)
        v = float(np.mean((flat - exact["mean"]) ** 2))
        v_se = math.sqrt((exact["central_m4"] - exact["variance"] ** 2) / flat.size)
        rows.append(ResultRow(idx, "mean", exact["mean"], m, m_se))
        rows.append(ResultRow(idx, "variance", exact["variance"], v, v_se))
        labels.extend([{"y": y0}] * 3)
    notes = {"rgo_stats": dataclasses.asdict(total), "beta": beta, "M": big_m, "iteration_bound": iter_bound}
    return ExperimentResult(rows, labels, notes)


def discrete_continuous_gap(ou_cfg: OuConfig, t: float) -> tuple[int, float, float]:
    """``(k, ULA KL at k = ceil(t/eta), Langevin KL at t)``."""
    k = math.ceil(t / ou_cfg.eta - 1e-9)
    return k, ou_ula_kl(ou_cfg, k), ou_langevin(ou_cfg, t)[1]


def run_langevin_limit(cfg: ExperimentConfig) -> ExperimentResult:
    p = _target(cfg)
    if p.kind != 0:
        raise PreconditionError("langevin_limit needs a Gaussian target")
    rows, labels = [], []
    for t in cfg.t_grid:
        for j in range(cfg.n_halvings):
            eta = cfg.eta / 2**j
            ou = OuConfig(p.alpha, eta, cfg.d, cfg.c0)
            k, discrete, continuous = discrete_continuous_gap(ou, t)
            rows.append(ResultRow(k, "kl", analytic=continuous, empirical=discrete))
            labels.append({"t": t, "eta": eta})
    return ExperimentResult(rows, labels)


RUNNERS = {
    "analytic": run_analytic,
    "simulate_ula": run_simulate_ula,
    "simulate_proximal": run_simulate_proximal,
    "contraction_sweep": run_contraction_sweep,
    "rgo_check": run_rgo_check,
    "langevin_limit": run_langevin_limit,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)


# --------------------------------------------------------------------------
# serialization


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.k, r.quantity, _fmt(r.analytic), _fmt(r.empirical), _fmt(r.std_error),
                         _fmt(r.theoretical_bound)])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            parsed = {"k": int(row["k"]), "quantity": row["quantity"]}
            for col in CSV_HEADER[2:]:
                parsed[col] = float(row[col]) if row[col] != "" else None
            out.append(parsed)
        return out


def version_string() -> str:
    """``git describe`` output when run from a checkout, else ``v<version>``."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5, check=True,
        )
        desc = out.stdout.strip()
        if desc:
            return f"v{__version__}-g{desc}" if not desc.startswith("v") else desc
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def sidecar_path(output_path) -> Path:
    return Path(output_path).with_suffix(".json")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult, duration: float) -> tuple[Path, Path]:
    out = Path(cfg.output_path)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(result.rows))
    side = sidecar_path(out)
    payload = {
        "config": cfg.to_dict(),
        "version": version_string(),
        "duration_seconds": duration,
        "row_labels": result.labels,
        "notes": result.notes,
    }
    with open(side, "w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out, side


def run(cfg: ExperimentConfig) -> tuple[ExperimentResult, Path, Path]:
    """Run one experiment and write its CSV and JSON sidecar."""
    start = time.perf_counter()
    result = run_experiment(cfg)
    duration = time.perf_counter() - start
    csv_path, side = write_outputs(cfg, result, duration)
    return result, csv_path, side


def config_from_sidecar(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh)["config"])
