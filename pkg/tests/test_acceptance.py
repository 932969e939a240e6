"""Acceptance criteria, each run at its stated tolerance and runtime budget.

The terminal summary prints one PASS/FAIL line per criterion.
"""

import json
import math
import time

import numpy as np

import oracles
from langevin_phi.analytics import (
    OuConfig,
    contraction_bound_proximal,
    eps_window,
    fit_rate,
    ou_langevin,
    ou_proximal_eps,
    ou_proximal_kl,
    ou_proximal_variance,
    ou_ula_biased_variance,
    ou_ula_eps,
    ou_ula_kl,
    ou_ula_variance,
    theorem_bound,
)
from langevin_phi.cli import main
from langevin_phi.experiments import SWEEP_KERNELS, sweep_bound, sweep_ratio
from langevin_phi.isoperimetry import bound_ula_biased_limit, gaussian_phi_si_constant, verify_phi_si
from langevin_phi.phi import GaussianSpec, gaussian_phi_divergence, gaussian_phi_fisher_info, phi_registry
from langevin_phi.rng import RngStream
from langevin_phi.samplers import RgoStats, gaussian_fit_recorder, proximal_run, rgo_rejection, ula_run
from langevin_phi.targets import make_cosine_perturbed, make_gaussian_potential

ALPHAS = (0.5, 1.0, 2.0)
DIMS = (1, 5)
K_MAX = 200


def direct_kl(c, ref, d):
    return gaussian_phi_divergence("kl", GaussianSpec(d, c), GaussianSpec(d, ref)).value


def ula_grid():
    for alpha in ALPHAS:
        # 0.1, 0.5 and 1/alpha, each capped at the stability limit 1/alpha
        etas = sorted({min(e, 1.0 / alpha) for e in (0.1, 0.5, 1.0 / alpha)})
        for eta in etas:
            for d in DIMS:
                yield OuConfig(alpha, eta, d)


def proximal_grid():
    for alpha in ALPHAS:
        for eta in (0.1, 0.5, 1.0, 2.0):
            for d in DIMS:
                yield OuConfig(alpha, eta, d)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_criterion_01_ula_closed_form_identity(report):
    worst, n = 0.0, 0
    with Timer() as t:
        for cfg in ula_grid():
            ref = ou_ula_biased_variance(cfg)
            for k in range(K_MAX + 1):
                worst = max(worst, abs(ou_ula_kl(cfg, k) - direct_kl(ou_ula_variance(cfg, k), ref, cfg.d)))
                n += 1
    report(f"{n} points, max |displayed - direct| = {worst:.2e} (tol 1e-12), {t.seconds:.2f}s")
    assert worst <= 1e-12
    assert t.seconds < 1.0


def test_criterion_02_proximal_closed_form_identity(report):
    worst, n = 0.0, 0
    with Timer() as t:
        for cfg in proximal_grid():
            for k in range(K_MAX + 1):
                worst = max(worst, abs(ou_proximal_kl(cfg, k)
                                       - direct_kl(ou_proximal_variance(cfg, k), 1.0 / cfg.alpha, cfg.d)))
                n += 1
    report(f"{n} points, max |displayed - direct| = {worst:.2e} (tol 1e-12), {t.seconds:.2f}s")
    assert worst <= 1e-12
    assert t.seconds < 1.0


def _simulation_summary(records, variance_fn, kl_fn):
    worst_z, worst_rel, checked = 0.0, 0.0, []
    for rec in records:
        k = rec["k"]
        worst_z = max(worst_z, abs(rec["variance"] - variance_fn(k)) / rec["variance_se"])
        kl = kl_fn(k)
        if kl >= 1e-4:
            rel = abs(rec["divergence"] - kl) / kl
            worst_rel = max(worst_rel, rel)
            checked.append(k)
    return worst_z, worst_rel, checked


def test_criterion_03_empirical_ula(report):
    cfg = OuConfig(1.0, 0.5, 1, 1.0)
    p = make_gaussian_potential(1.0, 1)
    with Timer() as t:
        ref = GaussianSpec(1, ou_ula_biased_variance(cfg))
        traj = ula_run(GaussianSpec(1, 1.0), p, 0.5, 50, 100_000, RngStream(0), gaussian_fit_recorder(ref))
    z, rel, ks = _simulation_summary(traj.records, lambda k: ou_ula_variance(cfg, k), lambda k: ou_ula_kl(cfg, k))
    report(f"max variance z = {z:.2f} (tol 3), max KL rel err = {rel:.3f} (tol 0.05) at k in {ks}, "
           f"{t.seconds:.2f}s")
    assert len(traj.records) == 51
    assert z <= 3.0
    assert rel <= 0.05
    assert t.seconds < 20.0


def test_criterion_04_empirical_proximal(report):
    cfg = OuConfig(2.0, 1.0, 1, 1.0)
    p = make_gaussian_potential(0.5, 1)
    with Timer() as t:
        traj = proximal_run(GaussianSpec(1, 1.0), p, 1.0, 50, 100_000, "exact", RngStream(0),
                            gaussian_fit_recorder(GaussianSpec(1, 0.5)))
    z, rel, ks = _simulation_summary(traj.records, lambda k: ou_proximal_variance(cfg, k),
                                     lambda k: ou_proximal_kl(cfg, k))
    report(f"max variance z = {z:.2f} (tol 3), max KL rel err = {rel:.3f} (tol 0.05) at k in {ks}, "
           f"{t.seconds:.2f}s")
    assert z <= 3.0
    assert rel <= 0.05
    assert t.seconds < 20.0


def test_criterion_05_theorem_domination(report):
    violations, n = 0, 0
    with Timer() as t:
        for cfg in ula_grid():
            alpha_si = bound_ula_biased_limit(cfg.alpha, cfg.alpha, cfg.eta).alpha_lower
            d0 = ou_ula_kl(cfg, 0)
            for k in range(K_MAX + 1):
                bound = theorem_bound("ula", alpha_si, cfg.alpha, cfg.eta, k, d0)
                violations += ou_ula_kl(cfg, k) > bound
                n += 1
        for cfg in proximal_grid():
            d0 = ou_proximal_kl(cfg, 0)
            for k in range(K_MAX + 1):
                bound = theorem_bound("proximal", cfg.alpha, None, cfg.eta, k, d0)
                violations += ou_proximal_kl(cfg, k) > bound
                n += 1
    report(f"{violations} violations over {n} points, {t.seconds:.2f}s")
    assert violations == 0
    assert t.seconds < 1.0


def test_criterion_06_rate_tightness(report):
    # From c0 = 1 the eps_k >= 1 window has one point (proximal) or none (ULA),
    # so both fits start from eps_0 = 1e6, deep in the large-eps regime.
    with Timer() as t:
        prox = OuConfig(100.0, 0.1, 1, 1e6 / 100.0)
        w_prox = eps_window(ou_proximal_eps, prox, 40)
        r_prox = fit_rate([(k, ou_proximal_kl(prox, k)) for k in range(41)], w_prox)
        c_inf = ou_ula_biased_variance(OuConfig(1.0, 0.1))
        ula = OuConfig(1.0, 0.1, 1, 1e6 * c_inf)
        w_ula = eps_window(ou_ula_eps, ula, 400)
        r_ula = fit_rate([(k, ou_ula_kl(ula, k)) for k in range(401)], w_ula)
    prox_rel = r_prox.per_step_factor / (1 / 121) - 1
    ula_rel = r_ula.per_step_factor / 0.81 - 1
    report(f"proximal factor {r_prox.per_step_factor:.5f} vs 1/121 ({prox_rel:+.3f}, window {w_prox}); "
           f"ULA factor {r_ula.per_step_factor:.4f} vs 0.81 ({ula_rel:+.3f}, window {w_ula}), {t.seconds:.2f}s")
    assert abs(prox_rel) <= 0.10
    assert abs(ula_rel) <= 0.10
    assert t.seconds < 1.0


def test_criterion_07_contraction_sweeps(report):
    kl = phi_registry("kl")
    violations, n, sups = 0, 0, {k: 0.0 for k in SWEEP_KERNELS}
    with Timer() as t:
        for alpha in ALPHAS:
            for eta in (0.1, 0.5, 1.0 / alpha, 2.0):
                for kernel in SWEEP_KERNELS:
                    if kernel == "ula" and eta > 1.0 / alpha:
                        continue
                    bound = sweep_bound(kernel, alpha, eta)
                    ref = 2.0 / (alpha * (2.0 - alpha * eta)) if kernel == "ula" else 1.0 / alpha
                    for d in DIMS:
                        for a in ref * np.geomspace(0.05, 20.0, 61):
                            ratio, _, _ = sweep_ratio(kernel, kl, float(a), alpha, eta, d)
                            if math.isnan(ratio):
                                continue
                            violations += ratio > bound
                            sups[kernel] = max(sups[kernel], ratio / bound)
                            n += 1
    report(f"{violations} violations over {n} ratios; max ratio/bound "
           + ", ".join(f"{k} {v:.3f}" for k, v in sups.items()) + f", {t.seconds:.2f}s")
    # the composed proximal bound is the square of the one-step bound
    assert contraction_bound_proximal(1.0, 1.0).composed == 0.25
    assert violations == 0
    assert t.seconds < 1.0


def test_criterion_08_rejection_rgo(report):
    with Timer() as t:
        gauss = make_gaussian_potential(1.0, 1)
        g_stats = RgoStats()
        y = RngStream(1).normals(1, np.arange(10_000), 0, 1) * 2.0
        rgo_rejection(y, gauss, 0.5, RngStream(0), stats=g_stats)

        eps, eta = 0.5, 0.25
        p = make_cosine_perturbed(eps, 1)
        ceiling = 1.05 * math.sqrt((1.5 + 1 / eta) / (0.5 + 1 / eta))
        f = oracles.cosine_potential(eps)
        n = 100_000
        worst_props, worst_z = 0.0, 0.0
        for idx, y0 in enumerate((-3.0, -2.0, -1.0, 0.0, 0.7, 2.0, 3.0)):
            stats = RgoStats()
            x = rgo_rejection(np.full((n, 1), y0), p, eta, RngStream(0), stats=stats, step=idx)[:, 0]
            worst_props = max(worst_props, stats.mean_proposals)
            mean, var = oracles.rgo_moments(f, y0, eta, center=y0 / 1.25, width=8.0)
            z_mean = abs(x.mean() - mean) / math.sqrt(var / n)
            # SE of the second central moment, using the sample fourth moment
            c = x - mean
            z_var = abs(np.mean(c * c) - var) / math.sqrt(np.var(c * c, ddof=1) / n)
            worst_z = max(worst_z, z_mean, z_var)
    report(f"gaussian: {g_stats.total_proposals} proposals / {g_stats.calls} calls; cosine: max mean proposals "
           f"{worst_props:.4f} (ceiling {ceiling:.4f}), max moment z = {worst_z:.2f} (tol 4), {t.seconds:.2f}s")
    assert g_stats.calls == 10_000 and g_stats.total_proposals == g_stats.calls
    assert worst_props <= ceiling
    assert worst_z <= 4.0
    assert t.seconds < 30.0


def test_criterion_09_langevin_limit(report):
    etas = (0.1, 0.05, 0.025)
    failures, lines = [], []
    with Timer() as t:
        for c0 in (2.0, 0.5):
            for t_end in (0.5, 1.0, 2.0):
                gaps = []
                for eta in etas:
                    cfg = OuConfig(1.0, eta, 1, c0)
                    k = math.ceil(t_end / eta - 1e-9)
                    gaps.append(abs(ou_ula_kl(cfg, k) - ou_langevin(cfg, t_end)[1]))
                if not (gaps[0] > gaps[1] > gaps[2]):
                    failures.append((c0, t_end, gaps))
                lines.append(f"{gaps[0] / gaps[2]:.2f}")
    report(f"gap shrink factors over two halvings {', '.join(lines)}; {len(failures)} non-monotone, "
           f"{t.seconds:.2f}s")
    assert not failures
    assert t.seconds < 1.0


def test_criterion_10_phi_sobolev_suite(report):
    grid = np.geomspace(0.1, 10.0, 15)
    checked, violations, worst_q = 0, 0, 0.0
    with Timer() as t:
        for phi in ("kl", "chi2"):
            for d in (1, 2, 5, 10):
                for b in grid:
                    nu = GaussianSpec(d, float(b))
                    bound = gaussian_phi_si_constant(nu)
                    for a in grid:
                        rep = verify_phi_si(phi, GaussianSpec(d, float(a)), nu, bound, rtol=1e-9)
                        if rep.vacuous and rep.divergence != 0.0:
                            continue
                        checked += 1
                        violations += not rep.passed
        # quadrature cross-check of both sides on a sub-grid
        for phi in ("kl", "chi2"):
            for d in (1, 3):
                for b in grid[::4]:
                    for a in grid[::4]:
                        if a == b or (phi == "chi2" and 2 * b <= 1.2 * a):
                            continue
                        D = oracles.divergence_fast(phi, float(a), float(b), d)
                        FI = oracles.fisher_info_fast(phi, float(a), float(b), d)
                        cD = gaussian_phi_divergence(phi, GaussianSpec(d, a), GaussianSpec(d, b)).value
                        cF = gaussian_phi_fisher_info(phi, GaussianSpec(d, a), GaussianSpec(d, b)).value
                        worst_q = max(worst_q, abs(D / cD - 1), abs(FI / cF - 1))
                        violations += not (2.0 / b * D <= FI * (1 + 1e-9))
                        checked += 1
    report(f"{violations} violations over {checked} pairs; closed form vs quadrature max rel {worst_q:.1e}, "
           f"{t.seconds:.2f}s")
    assert violations == 0
    assert worst_q <= 1e-9
    assert t.seconds < 5.0


DETERMINISM_CONFIGS = {
    "analytic": {"experiment": "analytic", "alpha": 1.0, "L": 1.0, "eta": 0.5, "k_max": 20},
    "simulate_ula": {"experiment": "simulate_ula", "eta": 0.5, "k_max": 20, "n_particles": 20_000},
    "simulate_proximal": {"experiment": "simulate_proximal", "target": {"name": "cosine", "epsilon": 0.5},
                          "rgo": "rejection", "eta": 0.25, "k_max": 5, "n_particles": 5_000},
    "contraction_sweep": {"experiment": "contraction_sweep", "kernel": "proximal", "eta": 1.0,
                          "n_particles": 20_000},
    "rgo_check": {"experiment": "rgo_check", "target": {"name": "cosine", "epsilon": 0.5}, "eta": 0.25,
                  "n_particles": 10_000},
    "langevin_limit": {"experiment": "langevin_limit", "c0": 2.0, "eta": 0.1},
}


def test_criterion_11_determinism(tmp_path, report):
    identical = []
    with Timer() as t:
        for name, raw in DETERMINISM_CONFIGS.items():
            outputs = []
            for run_id in (1, 2):
                cfg_path = tmp_path / f"{name}.json"
                cfg_path.write_text(json.dumps(dict(raw, seed=20240501)))
                out = tmp_path / f"{name}_{run_id}.csv"
                assert main(["run", "--config", str(cfg_path), "--output", str(out), "--quiet"]) == 0
                outputs.append(out.read_bytes())
            identical.append(outputs[0] == outputs[1])
    report(f"{sum(identical)}/{len(identical)} experiments byte-identical across reruns, {t.seconds:.2f}s")
    assert all(identical)
    assert t.seconds < 60.0

