import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from langevin_phi import _backend
from langevin_phi.analytics import OuConfig, ou_ula_variance
from langevin_phi.errors import PreconditionError, RGOError, StepSizeError
from langevin_phi.phi import GaussianSpec
from langevin_phi.rng import RngStream
from langevin_phi.samplers import (
    Ensemble,
    RgoStats,
    ensemble_variance,
    gaussian_fit_recorder,
    marginal_shape,
    proximal_forward_step,
    proximal_run,
    rgo_exact_gaussian,
    rgo_rejection,
    ula_run,
    ula_step,
)
from langevin_phi.targets import make_cosine_perturbed, make_gaussian_potential

N = 100_000


def within(value, target, se, k=3.0):
    return abs(value - target) <= k * se


class TestEnsemble:
    def test_shape_checks(self):
        with pytest.raises(PreconditionError):
            Ensemble(np.zeros(3))
        with pytest.raises(PreconditionError):
            Ensemble(np.array([[np.nan]]))

    def test_from_gaussian_is_deterministic(self):
        a = Ensemble.from_gaussian(GaussianSpec(2, 3.0), 100, RngStream(5))
        b = Ensemble.from_gaussian(GaussianSpec(2, 3.0), 100, RngStream(5))
        np.testing.assert_array_equal(a.particles, b.particles)
        assert a.n == 100 and a.d == 2 and a.step == 0

    def test_marginal_shape_of_gaussian(self):
        e = Ensemble.from_gaussian(GaussianSpec(3, 2.0), N, RngStream(1))
        shape = marginal_shape(e)
        assert np.all(np.abs(shape["skewness"]) < 4 * shape["skewness_se"])
        assert np.all(np.abs(shape["excess_kurtosis"]) < 4 * shape["kurtosis_se"])


class TestUlaStep:
    def test_forced_noise(self):
        p = make_gaussian_potential(1.0, 1)
        out = ula_step(Ensemble(np.array([[1.0]])), p, 0.1, RngStream(0), noise=np.zeros((1, 1)))
        assert out.particles[0, 0] == pytest.approx(0.9, rel=1e-15)
        assert out.step == 1

    def test_tiny_step_is_identity(self):
        p = make_gaussian_potential(1.0, 2)
        x = np.array([[0.3, -2.0]])
        out = ula_step(Ensemble(x), p, 1e-14, RngStream(0), noise=np.zeros((1, 2)))
        np.testing.assert_allclose(out.particles, x, rtol=1e-13)

    def test_one_step_variance(self):
        p = make_gaussian_potential(1.0, 1)
        e = Ensemble.from_gaussian(GaussianSpec(1, 1.0), N, RngStream(2))
        var, se = ensemble_variance(ula_step(e, p, 0.5, RngStream(2)))
        assert within(var, 1.25, se)

    def test_step_size_guard(self):
        p = make_gaussian_potential(0.5, 1)
        e = Ensemble(np.zeros((2, 1)))
        with pytest.raises(StepSizeError):
            ula_step(e, p, 0.6, RngStream(0))
        with pytest.warns(RuntimeWarning):
            ula_step(e, p, 0.6, RngStream(0), allow_large_step=True)


class TestUlaRun:
    def test_stationary_at_biased_limit(self):
        p = make_gaussian_potential(1.0, 1)
        traj = ula_run(GaussianSpec(1, 4 / 3), p, 0.5, 10, N, RngStream(3))
        assert len(traj.records) == 11
        for rec in traj.records:
            assert within(rec["variance"], 4 / 3, rec["variance_se"])

    def test_zero_steps(self):
        p = make_gaussian_potential(1.0, 1)
        traj = ula_run(GaussianSpec(1, 1.0), p, 0.5, 0, 10, RngStream(0))
        assert [r["k"] for r in traj.records] == [0]
        assert traj.final.step == 0

    def test_matches_closed_form_variance(self):
        p = make_gaussian_potential(1.0, 1)
        traj = ula_run(GaussianSpec(1, 1.0), p, 0.5, 10, N, RngStream(4))
        rec = traj.records[10]
        assert rec["k"] == 10
        assert within(rec["variance"], ou_ula_variance(OuConfig(1.0, 0.5), 10), rec["variance_se"])

    def test_same_seed_same_trajectory(self):
        p = make_cosine_perturbed(0.3, 2)
        a = ula_run(GaussianSpec(2, 1.0), p, 0.2, 5, 500, RngStream(9)).final.particles
        b = ula_run(GaussianSpec(2, 1.0), p, 0.2, 5, 500, RngStream(9)).final.particles
        np.testing.assert_array_equal(a, b)

    def test_gaussian_fit_recorder(self):
        p = make_gaussian_potential(1.0, 2)
        rec = gaussian_fit_recorder(GaussianSpec(2, 4 / 3))
        traj = ula_run(GaussianSpec(2, 1.0), p, 0.5, 1, 1000, RngStream(0), rec)
        assert set(traj.records[0]) == {"k", "variance", "variance_se", "divergence", "divergence_se"}
        assert traj.records[0]["divergence_se"] > 0


class TestForwardStep:
    def test_forced_zero_noise(self):
        x = np.array([[1.0, -2.0]])
        out = proximal_forward_step(Ensemble(x), 0.7, RngStream(0), noise=np.zeros((1, 2)))
        np.testing.assert_array_equal(out.particles, x)

    def test_forced_noise(self):
        out = proximal_forward_step(Ensemble(np.array([[2.0]])), 1.0, RngStream(0), noise=np.ones((1, 1)))
        assert out.particles[0, 0] == 3.0

    def test_variance_adds(self):
        e = Ensemble.from_gaussian(GaussianSpec(1, 0.6), N, RngStream(5))
        var, se = ensemble_variance(proximal_forward_step(e, 0.4, RngStream(5)))
        assert within(var, 1.0, se)


class TestExactRgo:
    def test_tiny_eta_returns_y(self):
        y = np.array([[0.5, -1.0]])
        np.testing.assert_allclose(rgo_exact_gaussian(y, 1.0, 1e-14, RngStream(0)), y, atol=1e-6)

    def test_centered(self):
        x = rgo_exact_gaussian(np.zeros((N, 1)), 1.0, 1.0, RngStream(6))
        assert within(x.mean(), 0.0, math.sqrt(0.5 / N))
        assert within(x.var(), 0.5, 0.5 * math.sqrt(2 / N))

    def test_at_two(self):
        x = rgo_exact_gaussian(np.full((N, 1), 2.0), 1.0, 1.0, RngStream(7))[:, 0]
        assert within(x.mean(), 1.0, math.sqrt(0.5 / N))
        assert within(x.var(), 0.5, 0.5 * math.sqrt(2 / N))

    def test_single_point(self):
        out = rgo_exact_gaussian(np.array([1.0, 2.0]), 1.0, 1.0, RngStream(0))
        assert out.shape == (2,)


class TestRejectionRgo:
    def test_gaussian_accepts_every_first_proposal(self):
        p = make_gaussian_potential(0.8, 2)
        stats = RgoStats()
        y = RngStream(0).normals(1, np.arange(10_000), 0, 2)
        rgo_rejection(y, p, 0.5, RngStream(1), stats=stats)
        assert stats.calls == 10_000
        assert stats.total_proposals == stats.calls
        assert stats.max_proposals_single_call == 1

    def test_cosine_proposal_count(self):
        p = make_cosine_perturbed(0.5, 1)
        stats = RgoStats()
        rgo_rejection(np.full((10_000, 1), 0.7), p, 0.25, RngStream(2), stats=stats)
        assert stats.mean_proposals <= math.sqrt(5.5 / 4.5) * 1.05

    def test_cosine_moments_match_quadrature(self):
        p = make_cosine_perturbed(0.5, 1)
        x = rgo_rejection(np.full((N, 1), 0.7), p, 0.25, RngStream(3))[:, 0]
        mean, var = oracles.rgo_moments(oracles.cosine_potential(0.5), 0.7, 0.25, center=0.56, width=8.0)
        assert within(x.mean(), mean, math.sqrt(var / N), 4)
        # Var of the sample variance is about 2 var^2 / n for a near-Gaussian law
        assert within(x.var(), var, var * math.sqrt(2 / N) * 1.2, 4)

    @pytest.mark.skipif(not _backend.NUMBA_AVAILABLE, reason="numba backend unavailable")
    def test_backends_agree(self):
        p = make_cosine_perturbed(0.4, 3)
        y = RngStream(0).normals(1, np.arange(2000), 0, 3) * 2
        a, sa = RgoStats(), RgoStats()
        x_numba = rgo_rejection(y, p, 0.3, RngStream(4), stats=a, step=3, backend="numba")
        x_numpy = rgo_rejection(y, p, 0.3, RngStream(4), stats=sa, step=3, backend="numpy")
        np.testing.assert_allclose(x_numba, x_numpy, rtol=1e-12, atol=1e-12)
        assert a == sa

    def test_single_point(self):
        out = rgo_rejection(np.array([0.2, 0.1]), make_cosine_perturbed(0.2, 2), 0.5, RngStream(0))
        assert out.shape == (2,)

    def test_step_size_guard(self):
        with pytest.raises(StepSizeError):
            rgo_rejection(np.zeros((1, 1)), make_cosine_perturbed(0.5, 1), 1 / 1.5, RngStream(0))

    def test_needs_strong_convexity(self):
        from langevin_phi.targets import Potential

        flat = Potential(lambda x: np.zeros(x.shape[0]), lambda x: np.zeros_like(x), 0.0, 1.0, 1)
        with pytest.raises(PreconditionError):
            rgo_rejection(np.zeros((1, 1)), flat, 0.5, RngStream(0))

    def test_smooth_branch_not_implemented(self):
        with pytest.raises(NotImplementedError):
            rgo_rejection(np.zeros((1, 1)), make_cosine_perturbed(0.5, 1), 0.2, RngStream(0),
                          branch="smooth")

    @pytest.mark.parametrize("backend", ["numpy", "numba"])
    def test_optimizer_budget(self, backend):
        if backend == "numba" and not _backend.NUMBA_AVAILABLE:
            pytest.skip("numba backend unavailable")
        with pytest.raises(RGOError) as info:
            rgo_rejection(np.full((4, 1), 3.0), make_cosine_perturbed(0.5, 1), 0.25, RngStream(0),
                          max_iter=2, backend=backend)
        assert info.value.stats.calls == 4

    @pytest.mark.parametrize("backend", ["numpy", "numba"])
    def test_proposal_budget(self, backend):
        if backend == "numba" and not _backend.NUMBA_AVAILABLE:
            pytest.skip("numba backend unavailable")
        p = make_cosine_perturbed(0.9, 4)
        with pytest.raises(RGOError, match="exhausted"):
            rgo_rejection(np.full((2000, 4), 2.5), p, 0.5, RngStream(0), max_proposals=1, backend=backend)

    @given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 500), st.integers(0, 9), st.integers(0, 99)),
                    min_size=3, max_size=3))
    def test_stats_merge_is_associative(self, raw):
        a, b, c = (RgoStats(*t) for t in raw)
        assert a.merge(b).merge(c) == a.merge(b.merge(c))


class TestProximalRun:
    def test_stationary(self):
        p = make_gaussian_potential(0.5, 1)
        traj = proximal_run(GaussianSpec(1, 0.5), p, 1.0, 5, N, "exact", RngStream(8))
        for rec in traj.records:
            assert within(rec["variance"], 0.5, rec["variance_se"])

    def test_one_step_variance(self):
        p = make_gaussian_potential(0.5, 1)
        rec = proximal_run(GaussianSpec(1, 1.0), p, 1.0, 1, N, "exact", RngStream(9)).records[1]
        assert within(rec["variance"], 5 / 9, rec["variance_se"])

    def test_zero_steps(self):
        p = make_gaussian_potential(0.5, 1)
        traj = proximal_run(GaussianSpec(1, 1.0), p, 1.0, 0, 10, "exact", RngStream(0))
        assert len(traj.records) == 1

    def test_exact_needs_gaussian(self):
        with pytest.raises(PreconditionError):
            proximal_run(GaussianSpec(1, 1.0), make_cosine_perturbed(0.5, 1), 0.25, 1, 10, "exact",
                         RngStream(0))

    def test_rejection_on_gaussian_matches_exact_in_law(self):
        # alpha = L = 1/2 and eta = 1 < 1/L
        p = make_gaussian_potential(2.0, 1)
        traj = proximal_run(GaussianSpec(1, 1.0), p, 1.0, 2, N, "rejection", RngStream(10))
        assert traj.rgo_stats.calls == 2 * N
        assert traj.rgo_stats.total_proposals == 2 * N
        expected = 2.0 - 1.0 / 1.5**4
        assert within(traj.records[2]["variance"], expected, traj.records[2]["variance_se"])

    def test_rejection_stationary_for_cosine_target(self):
        # the target and the start are both symmetric, so the mean stays at zero
        p = make_cosine_perturbed(0.5, 1)
        traj = proximal_run(GaussianSpec(1, 1.0), p, 0.25, 3, 20_000, "rejection", RngStream(11))
        x = traj.final.particles[:, 0]
        assert within(x.mean(), 0.0, x.std() / math.sqrt(x.size), 4)
