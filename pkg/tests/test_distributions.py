"""Distribution primitives: moment checks against closed forms, KS tests
against scipy reference distributions, and special-function oracle values."""

import math

import numpy as np
import pytest
import scipy.integrate
import scipy.stats

from tppca.distributions import (
    GammaParams,
    MvtParams,
    digamma,
    gamma_posterior,
    mvt_logpdf,
    sample_gamma,
    sample_mvn,
    sample_mvt,
)

# Frozen digamma reference values (Abramowitz & Stegun 6.3.2/6.3.3 plus the
# recurrence psi(x+1) = psi(x) + 1/x applied from psi(1) = -gamma).
PSI_1 = -0.5772156649015329
PSI_HALF = -1.9635100260214235
PSI_10 = 2.2517525890667211


class TestGammaParams:
    def test_mean(self):
        assert GammaParams(2.5, 3.5).mean == pytest.approx(2.5 / 3.5)

    @pytest.mark.parametrize("shape,rate", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_rejects_nonpositive(self, shape, rate):
        with pytest.raises(ValueError):
            GammaParams(shape, rate)


class TestSampleGamma:
    def test_unit_mean(self, rng):
        u = sample_gamma(GammaParams(1.5, 1.5), rng, size=1_000_000)
        assert abs(u.mean() - 1.0) < 0.01

    def test_variance(self, rng):
        u = sample_gamma(GammaParams(1.5, 1.5), rng, size=1_000_000)
        assert abs(u.var() - 2.0 / 3.0) < 0.02

    def test_rate_convention(self, rng):
        # mean shape/rate = 2.5/3.5, not shape*scale = 2.5*3.5
        u = sample_gamma(GammaParams(2.5, 3.5), rng, size=1_000_000)
        assert abs(u.mean() - 0.7142857142857143) < 0.01

    def test_scalar_draw(self, rng):
        u = sample_gamma(GammaParams(2.0, 2.0), rng)
        assert np.isscalar(u) or u.shape == ()
        assert u > 0


class TestSampleMvn:
    def test_componentwise_mean(self, rng):
        x = sample_mvn(np.zeros(2), np.eye(2), rng, size=1_000_000)
        assert np.all(np.abs(x.mean(axis=0)) < 0.005)

    def test_correlation(self, rng):
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        x = sample_mvn(np.zeros(2), cov, rng, size=1_000_000)
        r = np.corrcoef(x.T)[0, 1]
        assert abs(r - 0.5) < 0.01

    def test_rejects_indefinite_cov(self, rng):
        cov = np.array([[1.0, 0.0], [0.0, -0.1]])
        with pytest.raises(ValueError, match="positive definite"):
            sample_mvn(np.zeros(2), cov, rng)

    def test_single_draw_shape(self, rng):
        x = sample_mvn(np.zeros(3), np.eye(3), rng)
        assert x.shape == (3,)


class TestSampleMvt:
    def test_gaussian_limit_matches_mvn_stream(self):
        t = MvtParams(np.inf, np.zeros(2), np.eye(2))
        a = sample_mvt(t, np.random.default_rng(3), size=100)
        b = sample_mvn(np.zeros(2), np.eye(2), np.random.default_rng(3), size=100)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("nu", [1.0, 3.0, 10.0])
    def test_ks_against_reference_cdf(self, nu):
        rng = np.random.default_rng(100 + int(nu))
        t = MvtParams(nu, np.zeros(1), np.eye(1))
        x = sample_mvt(t, rng, size=100_000).ravel()
        stat = scipy.stats.kstest(x, scipy.stats.t(df=nu).cdf)
        assert stat.pvalue > 0.01

    def test_covariance_factor(self, rng):
        # for nu=3 the covariance is nu/(nu-2) * sigma = 3 * sigma
        t = MvtParams(3.0, np.zeros(2), np.eye(2))
        x = sample_mvt(t, rng, size=1_000_000)
        cov = np.cov(x.T)
        np.testing.assert_allclose(cov, 3.0 * np.eye(2), atol=0.15)


class TestMvtLogpdf:
    def test_cauchy_mode(self):
        t = MvtParams(1.0, np.zeros(1), np.eye(1))
        assert mvt_logpdf(t, np.zeros(1)) == pytest.approx(math.log(1.0 / math.pi))

    def test_cauchy_at_one(self):
        t = MvtParams(1.0, np.zeros(1), np.eye(1))
        assert mvt_logpdf(t, np.ones(1)) == pytest.approx(math.log(1.0 / (2.0 * math.pi)))

    def test_matches_scipy(self, rng):
        mu = np.array([-1.0, 3.0])
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        t = MvtParams(5.0, mu, sigma)
        X = rng.normal(size=(20, 2)) * 2.0
        ref = scipy.stats.multivariate_t.logpdf(X, loc=mu, shape=sigma, df=5.0)
        np.testing.assert_allclose(mvt_logpdf(t, X), ref, rtol=1e-10)

    def test_gaussian_limit_matches_normal(self, rng):
        mu = np.array([0.5, -0.5])
        sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
        t = MvtParams(np.inf, mu, sigma)
        X = rng.normal(size=(10, 2))
        ref = scipy.stats.multivariate_normal.logpdf(X, mean=mu, cov=sigma)
        np.testing.assert_allclose(mvt_logpdf(t, X), ref, rtol=1e-10)

    @pytest.mark.parametrize("nu,p", [(3.0, 1), (3.0, 2), (7.5, 2)])
    def test_density_normalizes(self, nu, p):
        t = MvtParams(nu, np.zeros(p), np.eye(p))
        if p == 1:
            total, _ = scipy.integrate.quad(
                lambda v: math.exp(mvt_logpdf(t, np.array([v]))), -np.inf, np.inf
            )
        else:
            total, _ = scipy.integrate.dblquad(
                lambda y, x: math.exp(mvt_logpdf(t, np.array([x, y]))),
                -60,
                60,
                -60,
                60,
            )
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_dimension_mismatch(self):
        t = MvtParams(3.0, np.zeros(2), np.eye(2))
        with pytest.raises(ValueError, match="dimension"):
            mvt_logpdf(t, np.zeros(3))


class TestGammaPosterior:
    def test_update_no_distance(self):
        post = gamma_posterior(GammaParams(1.5, 1.5), q=2, mahalanobis=0.0)
        assert (post.shape, post.rate) == (2.5, 1.5)

    def test_update_with_distance(self):
        post = gamma_posterior(GammaParams(1.5, 1.5), q=2, mahalanobis=4.0)
        assert (post.shape, post.rate) == (2.5, 3.5)

    def test_identity_update(self):
        prior = GammaParams(0.7, 1.3)
        post = gamma_posterior(prior, q=0, mahalanobis=0.0)
        assert (post.shape, post.rate) == (prior.shape, prior.rate)

    def test_rejects_negative_distance(self):
        with pytest.raises(ValueError, match="nonnegative"):
            gamma_posterior(GammaParams(1.0, 1.0), q=1, mahalanobis=-0.5)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (1.5, 1.5), (5.0, 5.0)])
def test_scale_mixture_reproduces_t_marginal(a, b):
    """Compound sampling u ~ Ga(a, b), x|u ~ N(0, 1/u) gives x ~ t with
    2a degrees of freedom and scale sqrt(b/a)."""
    rng = np.random.default_rng(int(10 * a) + 1)
    n = 200_000
    u = sample_gamma(GammaParams(a, b), rng, size=n)
    x = rng.standard_normal(n) / np.sqrt(u)
    ref = scipy.stats.t(df=2.0 * a, scale=math.sqrt(b / a))
    stat = scipy.stats.kstest(x, ref.cdf)
    assert stat.pvalue > 0.01


def test_scale_mixture_bivariate_projection():
    # same conjugacy structure in two dimensions, checked on a projection
    rng = np.random.default_rng(77)
    a = b = 1.5
    sigma = np.array([[2.0, 0.6], [0.6, 1.0]])
    L = np.linalg.cholesky(sigma)
    n = 200_000
    u = sample_gamma(GammaParams(a, b), rng, size=n)
    x = (rng.standard_normal((n, 2)) @ L.T) / np.sqrt(u)[:, None]
    w = np.array([0.8, -0.6])
    proj_scale = math.sqrt((b / a) * float(w @ sigma @ w))
    stat = scipy.stats.kstest(x @ w, scipy.stats.t(df=2 * a, scale=proj_scale).cdf)
    assert stat.pvalue > 0.01


class TestDigamma:
    def test_reference_values(self):
        assert digamma(1.0) == pytest.approx(PSI_1, abs=1e-10)
        assert digamma(0.5) == pytest.approx(PSI_HALF, abs=1e-10)
        assert digamma(10.0) == pytest.approx(PSI_10, abs=1e-10)

    def test_recurrence(self):
        x = np.linspace(0.1, 100.0, 2047)
        np.testing.assert_allclose(digamma(x + 1.0) - digamma(x), 1.0 / x, atol=1e-10)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="positive"):
            digamma(0.0)
        with pytest.raises(ValueError, match="positive"):
            digamma(np.array([1.0, -2.0]))
