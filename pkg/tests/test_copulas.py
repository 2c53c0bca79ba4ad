"""Tests for the copula samplers and measure maps."""

import numpy as np
import pytest
from scipy import integrate, stats

from copuladr.copulas import (
    CopulaParam,
    _clayton_cdf,
    sample_pair,
    sample_pairs,
    spearman_of,
    tau_to_param,
    theta_from_tau,
)
from copuladr.errors import ContractViolation


class TestTauToParam:
    def test_gaussian_independence(self):
        assert tau_to_param("gaussian", 0.0).theta == 0.0

    def test_clayton_half(self):
        assert tau_to_param("clayton", 0.5).theta == pytest.approx(2.0, abs=1e-12)

    def test_gaussian_half(self):
        assert tau_to_param("gaussian", 0.5).theta == pytest.approx(np.sin(np.pi / 4), abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ContractViolation):
            tau_to_param("gaussian", 1.0)
        with pytest.raises(ContractViolation):
            tau_to_param("clayton", 0.0)
        with pytest.raises(ContractViolation):
            tau_to_param("clayton", -0.3)
        with pytest.raises(ContractViolation):
            tau_to_param("frank", 0.5)

    @pytest.mark.parametrize("family", ["gaussian", "clayton"])
    def test_mc_kendall_tau_roundtrip(self, family):
        # concordance-count oracle: empirical Kendall tau of big samples
        rng = np.random.default_rng(123)
        for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
            theta = theta_from_tau(family, tau)
            u = sample_pairs(family, np.full(10**5, float(theta)), rng)
            tau_hat = stats.kendalltau(u[:, 0], u[:, 1]).statistic
            assert tau_hat == pytest.approx(tau, abs=0.015)


class TestSamplePairs:
    def test_gaussian_independence_uncorrelated(self):
        rng = np.random.default_rng(0)
        u = sample_pairs("gaussian", np.zeros(10**5), rng)
        corr = np.corrcoef(u[:, 0], u[:, 1])[0, 1]
        assert abs(corr) < 0.01

    def test_clayton_theta2_kendall(self):
        rng = np.random.default_rng(1)
        u = sample_pairs("clayton", np.full(10**5, 2.0), rng)
        assert stats.kendalltau(u[:, 0], u[:, 1]).statistic == pytest.approx(0.5, abs=0.01)

    @pytest.mark.parametrize("family,theta", [("gaussian", 0.7), ("clayton", 2.0)])
    def test_margins_uniform(self, family, theta):
        rng = np.random.default_rng(2)
        u = sample_pairs(family, np.full(10**5, theta), rng)
        for j in (0, 1):
            ks = stats.kstest(u[:, j], "uniform").statistic
            assert ks < 0.006

    @pytest.mark.parametrize("family,theta", [("gaussian", 0.6), ("clayton", 1.5)])
    def test_exchangeability(self, family, theta):
        rng = np.random.default_rng(3)
        u = sample_pairs(family, np.full(10**5, theta), rng)
        v = sample_pairs(family, np.full(10**5, theta), rng)
        # swapped coordinates have the same joint law; compare via the
        # Kendall tau and a two-sample KS on each coordinate of (u1, u2) vs
        # (v2, v1)
        assert stats.ks_2samp(u[:, 0], v[:, 1]).pvalue > 0.01
        assert stats.ks_2samp(u[:, 1], v[:, 0]).pvalue > 0.01
        t1 = stats.kendalltau(u[:, 0], u[:, 1]).statistic
        t2 = stats.kendalltau(v[:, 1], v[:, 0]).statistic
        assert t1 == pytest.approx(t2, abs=0.02)

    def test_clayton_conditional_inversion_monotone(self):
        # for fixed u1, the inversion v -> u2 must be strictly increasing
        theta = 2.0
        u1 = 0.37
        v = np.linspace(0.01, 0.99, 99)
        t = np.expm1(-theta / (1 + theta) * np.log(v))
        u2 = np.exp(-np.log1p(u1 ** (-theta) * t) / theta)
        assert np.all(np.diff(u2) > 0)

    def test_open_interval(self):
        rng = np.random.default_rng(4)
        for family, theta in (("gaussian", 0.9), ("clayton", 10.0)):
            u = sample_pairs(family, np.full(10**4, theta), rng)
            assert u.min() > 0.0
            assert u.max() < 1.0

    def test_sample_pair_scalar(self):
        rng = np.random.default_rng(5)
        u1, u2 = sample_pair(CopulaParam("gaussian", 0.5), rng)
        assert 0.0 < u1 < 1.0 and 0.0 < u2 < 1.0


class TestSpearmanOf:
    def test_gaussian_zero(self):
        assert spearman_of(CopulaParam("gaussian", 0.0)) == 0.0

    def test_gaussian_comonotone_limit(self):
        rho = 1.0 - 1e-12
        assert spearman_of(CopulaParam("gaussian", rho)) == pytest.approx(1.0, abs=1e-5)

    def test_clayton_against_adaptive_quadrature(self):
        # dblquad on the same CDF identity is the independent integration oracle
        for theta in (0.25, 2.0, 8.0):
            ref, _ = integrate.dblquad(
                lambda v, u: _clayton_cdf(np.array(u), np.array(v), theta),
                0.0, 1.0, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10,
            )
            assert spearman_of(CopulaParam("clayton", theta)) == pytest.approx(
                12.0 * ref - 3.0, abs=1e-6
            )

    def test_clayton_against_monte_carlo(self):
        rng = np.random.default_rng(6)
        u = sample_pairs("clayton", np.full(10**6, 2.0), rng)
        mc = 12.0 * (u[:, 0] * u[:, 1]).mean() - 3.0
        assert spearman_of(CopulaParam("clayton", 2.0)) == pytest.approx(mc, abs=0.005)

    def test_param_validation(self):
        with pytest.raises(ContractViolation):
            CopulaParam("gaussian", 1.0)
        with pytest.raises(ContractViolation):
            CopulaParam("clayton", 0.0)
