import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from latent_corr import dist as D
from latent_corr.errors import DomainError, NumericalError, ParameterError

from oracles import bisect_quantile

ALL = [D.std_normal(), D.logistic(), D.laplace(), D.gumbel(), D.scaled_t(5), D.scaled_t(3.5)]
SYMMETRIC = [d for d in ALL if d.symmetric]
IDS = [str(d) for d in ALL]


class TestExamples:
    def test_pdf_at_zero(self):
        np.testing.assert_allclose(D.std_normal().pdf(0.0), 0.3989422804, atol=1e-10)
        np.testing.assert_allclose(D.logistic().pdf(0.0), math.pi / (4 * math.sqrt(3)), rtol=1e-14)
        np.testing.assert_allclose(D.laplace().pdf(0.0), 1 / math.sqrt(2), rtol=1e-14)

    @pytest.mark.parametrize("d", [D.std_normal(), D.logistic(), D.scaled_t(5)], ids=str)
    def test_cdf_at_zero(self, d):
        assert d.cdf(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_normal_quantiles(self):
        g = D.std_normal()
        assert g.quantile(0.5) == 0.0
        np.testing.assert_allclose(g.quantile(0.975), 1.959964, atol=1e-6)
        np.testing.assert_allclose(g.quantile(0.975), bisect_quantile(g, 0.975), atol=1e-12)

    def test_logistic_quantile_antisymmetric(self):
        d = D.logistic()
        eps = 0.123
        np.testing.assert_allclose(d.quantile(0.5 + eps), -d.quantile(0.5 - eps), rtol=1e-14)

    @pytest.mark.parametrize("d", ALL, ids=IDS)
    def test_quantile_against_bisection(self, d):
        for u in (1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999):
            np.testing.assert_allclose(d.quantile(u), bisect_quantile(d, u), atol=1e-10)


class TestAgainstScipy:
    """Independent reference laws from scipy.stats with explicit standardization."""

    REF = {
        "std_normal": stats.norm(),
        "logistic": stats.logistic(scale=math.sqrt(3) / math.pi),
        "laplace": stats.laplace(scale=1 / math.sqrt(2)),
        "gumbel": stats.gumbel_r(loc=-np.euler_gamma * math.sqrt(6) / math.pi, scale=math.sqrt(6) / math.pi),
        "scaled_t(df=5)": stats.t(5, scale=math.sqrt(3 / 5)),
    }

    @pytest.mark.parametrize("name", list(REF))
    def test_pdf_cdf(self, name):
        d = {str(x): x for x in ALL}[name]
        ref = self.REF[name]
        z = np.linspace(-8, 8, 161)
        np.testing.assert_allclose(d.pdf(z), ref.pdf(z), rtol=1e-10, atol=1e-300)
        np.testing.assert_allclose(d.cdf(z), ref.cdf(z), rtol=1e-10, atol=1e-15)
        np.testing.assert_allclose(d.sf(z), ref.sf(z), rtol=1e-9, atol=1e-15)
        np.testing.assert_allclose(d.logcdf(z), ref.logcdf(z), rtol=1e-9, atol=1e-14)
        np.testing.assert_allclose(d.logsf(z), ref.logsf(z), rtol=1e-9, atol=1e-14)


class TestMoments:
    @pytest.mark.parametrize("d", ALL, ids=IDS)
    def test_standardized(self, d):
        mass, mean, var = D.moments(d)
        assert abs(mass - 1) <= 1e-8
        assert abs(mean) <= 1e-8
        assert abs(var - 1) <= 1e-6

    @pytest.mark.parametrize("d", ALL, ids=IDS)
    def test_mass_against_scipy_quad(self, d):
        mass, _ = integrate.quad(d.pdf, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        np.testing.assert_allclose(mass, 1.0, atol=1e-8)


class TestInvariants:
    @pytest.mark.parametrize("d", ALL, ids=IDS)
    def test_cdf_monotone_on_sorted_grid(self, d):
        z = np.sort(np.random.default_rng(0).normal(scale=6, size=5000))
        assert np.all(np.diff(d.cdf(z)) >= 0)

    @pytest.mark.parametrize("d", SYMMETRIC, ids=str)
    def test_symmetry(self, d):
        z = np.linspace(-30, 30, 1201)
        np.testing.assert_allclose(d.pdf(z), d.pdf(-z), rtol=1e-14, atol=0)
        np.testing.assert_allclose(d.cdf(-z), 1.0 - d.cdf(z), atol=1e-12)

    @pytest.mark.parametrize("d", ALL, ids=IDS)
    def test_roundtrips(self, d):
        u = np.linspace(1e-6, 1 - 1e-6, 4001)
        np.testing.assert_allclose(d.cdf(d.quantile(u)), u, atol=1e-12)
        z = d.quantile(u)
        np.testing.assert_allclose(d.quantile(d.cdf(z)), z, atol=1e-9)

    @pytest.mark.parametrize("d", ALL, ids=IDS)
    def test_isf_matches_sf(self, d):
        v = np.logspace(-14, -0.5, 50)
        np.testing.assert_allclose(d.sf(d.isf(v)), v, rtol=1e-9)

    @pytest.mark.parametrize("d", ALL, ids=IDS)
    def test_log_derivatives_by_differences(self, d):
        z = np.array([-2.3, -0.7, 0.4, 1.9])
        h = 1e-5
        fd1 = (d.logpdf(z + h) - d.logpdf(z - h)) / (2 * h)
        fd2 = (d.dlogpdf(z + h) - d.dlogpdf(z - h)) / (2 * h)
        np.testing.assert_allclose(d.dlogpdf(z), fd1, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(d.d2logpdf(z), fd2, rtol=1e-5, atol=1e-7)

    @settings(max_examples=200, deadline=None)
    @given(st.sampled_from(ALL), st.floats(min_value=1e-9, max_value=1 - 1e-9))
    def test_roundtrip_property(self, d, u):
        assert abs(d.cdf(d.quantile(u)) - u) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.sampled_from(ALL), st.floats(min_value=-40, max_value=40), st.floats(min_value=0, max_value=5))
    def test_cdf_monotone_property(self, d, z, dz):
        assert d.cdf(z + dz) >= d.cdf(z)
        assert d.logcdf(z + dz) >= d.logcdf(z)

    def test_logcdf_deep_tail_finite(self):
        for d in ALL:
            assert np.isfinite(d.logcdf(-60.0)) and np.isfinite(d.logsf(60.0))


class TestErrors:
    def test_bad_family(self):
        with pytest.raises(ParameterError):
            D.StandardizedDistribution("cauchy")

    @pytest.mark.parametrize("df", [None, 2.0, 1.0, float("nan")])
    def test_bad_df(self, df):
        with pytest.raises(ParameterError):
            D.StandardizedDistribution("scaled_t", df)

    def test_df_on_other_family(self):
        with pytest.raises(ParameterError):
            D.StandardizedDistribution("logistic", 5.0)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_quantile_domain(self, u):
        with pytest.raises(DomainError):
            D.std_normal().quantile(u)

    def test_nonfinite_z(self):
        with pytest.raises(DomainError):
            D.std_normal().pdf(float("inf"))

    def test_variance_too_heavy_to_resolve(self):
        with pytest.raises(NumericalError):
            D.moments(D.scaled_t(2.5))

    def test_serialization(self):
        for d in ALL:
            assert D.StandardizedDistribution.from_dict(d.to_dict()) == d
        assert D.from_name(" Scaled_T ", 5) == D.scaled_t(5)


class TestRegularity:
    GRID = np.round(np.arange(-10, 10.0001, 0.01), 2)

    def test_normal_factor_gradient(self):
        rep = D.check_regularity(D.std_normal(), D.std_normal(), self.GRID)
        oracle = np.max(np.abs(self.GRID) * stats.norm.pdf(self.GRID))
        np.testing.assert_allclose(rep.max_abs_dgamma, oracle, rtol=1e-6)
        np.testing.assert_allclose(rep.max_abs_dgamma, 0.2420, atol=1e-4)
        assert abs(abs(rep.argmax_dgamma) - 1.0) <= 0.01
        assert rep.flags == ()
        assert np.isfinite(rep.max_abs_d3_logcdf)

    def test_laplace_noise_kink_excluded(self):
        rep = D.check_regularity(D.laplace(), D.std_normal(), self.GRID)
        assert 0.0 in rep.excluded
        assert np.isfinite(rep.max_abs_d3_logcdf) and np.isfinite(rep.max_abs_d3_logsf)
        assert "B" not in rep.flags

    def test_normal_d3_logcdf_against_closed_form(self):
        z = np.linspace(-5, 5, 101)
        rep = D.check_regularity(D.std_normal(), D.std_normal(), z)
        # d^3 log Phi = m'' with m = phi / Phi, m' = -m (z + m), m'' = -m' (z + m) - m (1 + m')
        m = stats.norm.pdf(z) / stats.norm.cdf(z)
        m1 = -m * (z + m)
        m2 = -m1 * (z + m) - m * (1 + m1)
        np.testing.assert_allclose(rep.max_abs_d3_logcdf, np.max(np.abs(m2)), rtol=1e-4)

    def test_bad_grid(self):
        with pytest.raises(DomainError):
            D.check_regularity(D.std_normal(), D.std_normal(), [])
        with pytest.raises(DomainError):
            D.check_regularity(D.std_normal(), D.std_normal(), [1.0, 0.0])
