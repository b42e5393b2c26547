import math
import warnings
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from latent_corr import dist as D
from latent_corr import likelihood as L
from latent_corr.errors import DegenerateFrequencyError, DegenerateFrequencyWarning, DomainError
from latent_corr.model import (
    BinarySample,
    ModelConfig,
    TrinarySample,
    discretize_binary,
    replication_seed,
    simulate_latent,
)

from oracles import trapezoid_log_marginal

NOISES = [D.std_normal(), D.logistic(), D.laplace(), D.gumbel(), D.scaled_t(5)]
CASES = {
    "1": ModelConfig(0.5, D.std_normal(), D.std_normal()),
    "2": ModelConfig(0.5, D.logistic(), D.std_normal()),
    "3": ModelConfig(0.5, D.laplace(), D.scaled_t(5)),
}
GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)


class TestFn:
    @pytest.mark.parametrize("noise", [D.std_normal(), D.logistic(), D.laplace()], ids=str)
    def test_half_at_zero(self, noise):
        for a in (0.1, 0.5, 0.9):
            assert L.fn_value(a, 0.5, noise, 0.0) == pytest.approx(-math.log(2), abs=1e-15)

    @pytest.mark.parametrize("noise", NOISES, ids=str)
    def test_derivatives_by_differences(self, noise):
        z = np.array([-1.7, -0.4, 0.3, 2.2])
        h = 1e-5
        for a, abar in ((0.3, 0.2), (0.7, 0.6)):
            fd1 = (L.fn_value(a, abar, noise, z + h) - L.fn_value(a, abar, noise, z - h)) / (2 * h)
            fd2 = (L.fn_d1(a, abar, noise, z + h) - L.fn_d1(a, abar, noise, z - h)) / (2 * h)
            np.testing.assert_allclose(L.fn_d1(a, abar, noise, z), fd1, rtol=1e-6, atol=1e-9)
            np.testing.assert_allclose(L.fn_d2(a, abar, noise, z), fd2, rtol=1e-5, atol=1e-8)

    @pytest.mark.parametrize("noise", NOISES, ids=str)
    @settings(max_examples=60, deadline=None)
    @given(
        a=st.floats(min_value=0.01, max_value=0.99),
        abar=st.floats(min_value=0.01, max_value=0.99),
        offsets=st.lists(st.floats(min_value=-30, max_value=30), min_size=1, max_size=50),
    )
    def test_context_identities(self, noise, a, abar, offsets):
        ctx = L.likelihood_context(a, abar, noise)
        assert abs(L.fn_d1(a, abar, noise, ctx.z_star)) <= 1e-8
        assert abs(ctx.fn_at_zstar - L.binary_entropy_term(abar)) <= 1e-12
        f2 = L.fn_d2(a, abar, noise, ctx.z_star)
        assert abs(f2 - ctx.fn2_at_zstar) <= 1e-10 * max(1.0, abs(f2))
        # quasi-concavity: F_n(z*) is the maximum
        z = ctx.z_star + np.asarray(offsets)
        assert np.all(L.fn_value(a, abar, noise, z) <= ctx.fn_at_zstar + 1e-12)

    @pytest.mark.parametrize("cid", list(CASES))
    def test_third_derivative_finite(self, cid):
        noise = CASES[cid].noise
        z = np.linspace(-20, 20, 4001)
        h = 1e-4
        for a, abar in ((0.2, 0.3), (0.5, 0.5), (0.9, 0.8)):
            d3 = (L.fn_d2(a, abar, noise, z + h) - L.fn_d2(a, abar, noise, z - h)) / (2 * h)
            assert np.all(np.isfinite(d3))

    def test_interior_only(self):
        with pytest.raises(DegenerateFrequencyError):
            L.fn_value(0.5, 0.0, D.std_normal(), 0.0)
        with pytest.raises(DomainError):
            L.likelihood_context(1.0, 0.5, D.std_normal())


class TestLogLikelihood:
    @pytest.mark.parametrize("cid", list(CASES))
    def test_single_observation(self, cid):
        cfg = CASES[cid]
        for a in (0.05, 0.5, 0.95):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateFrequencyWarning)
                assert L.log_likelihood(a, BinarySample.from_bits([1]), cfg) == pytest.approx(math.log(0.5), abs=1e-12)

    @pytest.mark.parametrize("cid", list(CASES))
    def test_zero_correlation(self, cid):
        b = BinarySample.from_count(1000, 377)
        assert L.log_likelihood(0.0, b, CASES[cid]) / 1000 == pytest.approx(-math.log(2), abs=1e-12)

    def test_transition_near_zero(self):
        b = BinarySample.from_count(1000, 530)
        v = L.log_likelihood(1e-8, b, CASES["1"]) / 1000
        assert abs(v + math.log(2)) < 1e-3

    @pytest.mark.parametrize("cid", list(CASES))
    def test_upper_bound(self, cid):
        cfg = CASES[cid]
        for r in range(5):
            b = discretize_binary(simulate_latent(cfg, 400, replication_seed(3, r)), 0.0)
            if b.abar in (0.0, 1.0):
                continue
            vals = L.log_likelihood_grid(GRID, b, cfg) / b.n
            assert np.all(vals <= L.binary_entropy_term(b.abar) + 1e-14)
            assert np.all(vals < 0)

    @pytest.mark.parametrize(
        "cid,n,k,a,tau",
        [
            ("1", 50, 0, 0.5, 0.0),
            ("1", 200, 1, 0.9, 0.0),
            ("1", 200, 199, 0.1, 0.8),
            ("2", 50, 12, 0.95, 0.0),
            ("2", 200, 150, 0.3, -0.5),
            ("3", 50, 25, 0.5, 0.0),
            ("3", 200, 3, 0.9, 0.8),
            ("3", 200, 180, 0.02, 0.0),
        ],
    )
    def test_against_trapezoid_oracle(self, cid, n, k, a, tau):
        base = CASES[cid]
        cfg = ModelConfig(0.5, base.noise, base.factor, tau)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateFrequencyWarning)
            got = L.log_likelihood(a, BinarySample.from_count(n, k), cfg)
        ref = trapezoid_log_marginal(a, k, n, cfg.noise, cfg.factor, tau)
        assert abs(got - ref) <= 1e-9 * abs(ref)

    def test_against_scipy_quad(self):
        # gumbel noise with a logistic factor: asymmetric, not in any case preset
        cfg = ModelConfig(0.5, D.gumbel(), D.logistic(), 0.3)
        n, k, a = 30, 11, 0.4
        sa, sb = math.sqrt(a), math.sqrt(1 - a)

        def f(y):
            w = (cfg.tau - sa * y) / sb
            return math.exp(k * cfg.noise.logsf(w) + (n - k) * cfg.noise.logcdf(w) + cfg.factor.logpdf(y))

        ref, _ = integrate.quad(f, -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=400)
        got = L.log_likelihood(a, BinarySample.from_count(n, k), cfg)
        assert abs(got - math.log(ref)) <= 1e-9 * abs(got)

    def test_degenerate_warns_and_is_exact_limit(self):
        cfg = CASES["1"]
        b = BinarySample.from_count(100, 100)
        with pytest.warns(DegenerateFrequencyWarning):
            v = L.log_likelihood(0.5, b, cfg)
        ref = trapezoid_log_marginal(0.5, 100, 100, cfg.noise, cfg.factor, 0.0)
        assert abs(v - ref) <= 1e-9 * abs(ref)

    def test_permutation_bit_exact(self):
        cfg = CASES["2"]
        b = discretize_binary(simulate_latent(cfg, 300, 17), 0.0)
        p = BinarySample.from_bits(np.random.default_rng(0).permutation(b.bits))
        assert L.log_likelihood(0.4, p, cfg) == L.log_likelihood(0.4, b, cfg)

    def test_grid_matches_pointwise(self):
        cfg = CASES["3"]
        b = BinarySample.from_count(120, 50)
        grid = L.log_likelihood_grid([0.0, 0.2, 0.7], b, cfg)
        np.testing.assert_allclose(grid, [L.log_likelihood(a, b, cfg) for a in (0.0, 0.2, 0.7)], rtol=1e-14)

    def test_domain(self):
        b = BinarySample.from_count(10, 4)
        for a in (-0.1, 1.0, 1.5):
            with pytest.raises(DomainError):
                L.log_likelihood(a, b, CASES["1"])


class TestCurves:
    def test_normalized_curve_is_flat(self):
        cfg = CASES["1"]
        b = discretize_binary(simulate_latent(cfg, 1000, replication_seed(0, 0)), 0.0)
        c = L.normalized_loglik_curve(b, cfg, GRID)
        assert np.ptp(c.values) <= 0.02
        assert np.all(c.values <= L.binary_entropy_term(b.abar))

    def test_scaled_positive(self):
        cfg = CASES["2"]
        b = BinarySample.from_count(500, 220)
        assert np.all(L.scaled_likelihood_grid(GRID, b, cfg) > 0)

    def test_scaled_requires_interior(self):
        with pytest.raises(DegenerateFrequencyError):
            L.scaled_likelihood(0.5, BinarySample.from_count(10, 0), CASES["1"])

    def test_curve_grid_validation(self):
        with pytest.raises(DomainError):
            L.Curve(np.array([0.2, 0.1]), np.array([1.0, 2.0]))


class TestLimits:
    def test_prop1_examples(self):
        g = D.std_normal()
        assert L.prop1_limit(0.5, 0.0, 0.0, g) == pytest.approx(-math.log(2), abs=1e-15)
        y = np.linspace(-5, 5, 101)
        vals = L.prop1_limit(0.5, y, 0.3, g)
        assert np.all(vals < 0)

    def test_prop1_conditional_simulation(self):
        cfg = CASES["1"]
        for y in (-0.8, 0.0, 1.2):
            b = discretize_binary(simulate_latent(cfg, 100_000, 5, fixed_y=y), 0.0)
            v = L.log_likelihood(0.3, b, cfg) / b.n
            assert abs(v - L.prop1_limit(0.5, y, 0.0, cfg.noise)) <= 0.01

    def test_prop2_center_value(self):
        g = D.std_normal()
        assert L.prop2_limit(0.5, 0.5, 0.0, 0.0, 10_000, g, g) == pytest.approx(math.sqrt(math.pi / 20_000), rel=1e-12)

    def test_prop2_sqrt_n_scaling(self):
        cfg = CASES["3"]
        for a, y, tau in ((0.2, 0.7, 0.0), (0.8, -1.1, 0.4)):
            v1 = L.prop2_limit(a, 0.5, y, tau, 1000, cfg.noise, cfg.factor)
            v4 = L.prop2_limit(a, 0.5, y, tau, 4000, cfg.noise, cfg.factor)
            assert v1 / v4 == pytest.approx(2.0, rel=1e-13)

    @pytest.mark.parametrize("y", [0.5, 1.0, 2.0, -1.3])
    def test_gaussian_argmax(self, y):
        g = D.std_normal()
        grid = np.arange(1, 1000) * 1e-3
        vals = L.prop2_limit(grid, 0.4, y, 0.0, 1000, g, g)
        assert abs(grid[np.argmax(vals)] - L.gaussian_prop2_maximizer(0.4, y)) <= 1e-3

    @pytest.mark.parametrize("y", [-1.0, 0.5])
    def test_typical_count_ratio_approaches_one(self, y):
        # with the count closest to n q the only error left is the O(1/n) term
        cfg = CASES["1"]
        q = cfg.noise.sf((0.0 - math.sqrt(0.5) * y) / math.sqrt(0.5))
        errs = []
        for n in (1000, 10_000, 100_000):
            b = BinarySample.from_count(n, int(round(n * q)))
            got = L.scaled_likelihood_grid([0.3, 0.5, 0.7], b, cfg)
            ref = L.prop2_limit(np.array([0.3, 0.5, 0.7]), 0.5, y, 0.0, n, cfg.noise, cfg.factor)
            errs.append(np.max(np.abs(got / ref - 1)))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-3

    def test_gap_shrinks_like_root_n(self):
        cfg = CASES["1"]
        grid = np.array([0.3, 0.5, 0.7])
        gaps = {}
        for n in (1000, 4000):
            rel = []
            for r in range(50):
                ls = simulate_latent(cfg, n, replication_seed(0, r))
                b = discretize_binary(ls, 0.0)
                got = L.scaled_likelihood_grid(grid, b, cfg)
                ref = L.prop2_limit(grid, 0.5, ls.y, 0.0, n, cfg.noise, cfg.factor)
                rel.append(np.abs(got / ref - 1))
            gaps[n] = np.mean(rel, axis=0)
        ratio = gaps[1000] / gaps[4000]
        assert np.all((ratio >= 1.3) & (ratio <= 3.0)), ratio


class TestExchangeable:
    @pytest.mark.parametrize("cid", list(CASES))
    def test_single_bit(self, cid):
        lq = L.exchangeable_outcome_logprobs(0.6, 1, CASES[cid])
        np.testing.assert_allclose(np.exp(lq), [0.5, 0.5], atol=1e-13)

    @pytest.mark.parametrize("noise", NOISES, ids=str)
    @pytest.mark.parametrize("tau", [0.0, 0.9])
    def test_sums_to_one(self, noise, tau):
        cfg = ModelConfig(0.5, noise, D.scaled_t(4), tau)
        for a in (0.05, 0.5, 0.97):
            lq = L.exchangeable_outcome_logprobs(a, 12, cfg)
            assert abs(np.sum(np.exp(L.log_binom(12) + lq)) - 1) <= 1e-12

    def test_sum_against_direct_enumeration(self):
        cfg = CASES["2"]
        n = 8
        lq = L.exchangeable_outcome_logprobs(0.35, n, cfg)
        total = sum(math.exp(lq[sum(bits)]) for bits in product((0, 1), repeat=n))
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("cid", list(CASES))
    def test_sign_flip_symmetry(self, cid):
        lq = L.exchangeable_outcome_logprobs(0.45, 20, CASES[cid])
        np.testing.assert_allclose(lq, lq[::-1], rtol=1e-12)

    def test_log_binom(self):
        np.testing.assert_allclose(np.exp(L.log_binom(6)), [1, 6, 15, 20, 15, 6, 1], rtol=1e-13)


class TestKL:
    KL_INF = 0.4391346  # log(c2/c1) + c1^2 / (2 c2^2) - 1/2 for (0.3, 0.7)

    def test_limit_constant(self):
        c1, c2 = float(L.c_a(0.3)), float(L.c_a(0.7))
        assert math.log(c2 / c1) + c1**2 / (2 * c2**2) - 0.5 == pytest.approx(self.KL_INF, abs=1e-7)

    def test_equal_parameters(self):
        assert L.kl_divergence(0.4, 0.4, 100, CASES["1"]) == 0.0

    @pytest.mark.parametrize("cid", list(CASES))
    def test_nonnegative(self, cid):
        for a1, a2 in ((0.1, 0.2), (0.8, 0.3), (0.5, 0.51)):
            assert L.kl_divergence(a1, a2, 40, CASES[cid]) >= 0

    def test_small_n_against_enumeration(self):
        cfg = CASES["3"]
        n = 6
        p = np.exp(L.log_binom(n) + L.exchangeable_outcome_logprobs(0.2, n, cfg))
        q = np.exp(L.log_binom(n) + L.exchangeable_outcome_logprobs(0.6, n, cfg))
        assert L.kl_divergence(0.2, 0.6, n, cfg) == pytest.approx(float(np.sum(special.rel_entr(p, q))), rel=1e-12)

    def test_bounded_and_approaching_limit(self):
        cfg = CASES["1"]
        ks = [L.kl_divergence(0.3, 0.7, n, cfg) for n in (10, 100, 1000, 10_000)]
        assert np.all(np.diff(ks) >= -1e-6)
        assert ks[-1] <= self.KL_INF
        assert self.KL_INF - ks[-1] <= 0.001


class TestTrinary:
    CFG = ModelConfig(0.5, D.laplace(), D.scaled_t(5), tau1=-0.7, tau2=0.4)

    def test_multinomial_sum(self):
        n = 6
        total = 0.0
        for k1 in range(n + 1):
            for k2 in range(n + 1 - k1):
                k3 = n - k1 - k2
                s = TrinarySample.from_cats([1] * k1 + [2] * k2 + [3] * k3)
                coef = math.factorial(n) / (math.factorial(k1) * math.factorial(k2) * math.factorial(k3))
                total += coef * math.exp(L.trinary_log_likelihood(0.6, s, self.CFG))
        assert total == pytest.approx(1.0, abs=1e-11)

    def test_collapse_to_binary(self):
        cfg = ModelConfig(0.5, tau=0.0, tau1=0.0, tau2=1e-300)
        ls = simulate_latent(cfg, 200, 3)
        cats = 1 + (ls.x > 0).astype(int) * 2
        b = discretize_binary(ls, 0.0)
        t = TrinarySample.from_cats(cats)
        assert L.trinary_log_likelihood(0.3, t, cfg) == pytest.approx(L.log_likelihood(0.3, b, cfg), rel=1e-12)

    def test_requires_breakpoints(self):
        with pytest.raises(DomainError):
            L.trinary_log_likelihood(0.5, TrinarySample.from_cats([1, 2]), ModelConfig(0.5))
