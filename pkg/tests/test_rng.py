import numpy as np
import pytest
from scipy import integrate, special, stats

from btrt.rng import RngStream

KS_ALPHA = 1e-3
KS_N = 100_000


def ks_pass(draws, cdf) -> bool:
    return stats.kstest(draws, cdf).pvalue > KS_ALPHA


# ----------------------------------------------------------------------
# stream discipline


def test_same_seed_same_stream_is_bit_identical():
    a = RngStream(42, stream=7)
    b = RngStream(42, stream=7)
    np.testing.assert_array_equal(a.standard_normal(1000), b.standard_normal(1000))
    np.testing.assert_array_equal(a.gamma(2.0, 3.0, size=100), b.gamma(2.0, 3.0, size=100))
    assert [a.gig(0.5, 1.0, 1.0) for _ in range(20)] == [
        b.gig(0.5, 1.0, 1.0) for _ in range(20)
    ]


def test_distinct_streams_differ_and_look_independent():
    a = RngStream(42, stream=0).standard_normal(50_000)
    b = RngStream(42, stream=1).standard_normal(50_000)
    assert not np.array_equal(a[:100], b[:100])
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_substream_is_deterministic():
    a = RngStream(9).substream(3).uniform(10)
    b = RngStream(9).substream(3).uniform(10)
    np.testing.assert_array_equal(a, b)


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        RngStream(-1)


# ----------------------------------------------------------------------
# gamma (shape-rate)


def test_gamma_mean():
    draws = RngStream(1).gamma(3.0, 1.5, size=1_000_000)
    assert draws.mean() == pytest.approx(2.0, abs=0.01)


def test_gamma_shape_one_is_exponential():
    draws = RngStream(2).gamma(1.0, 2.0, size=KS_N)
    assert ks_pass(draws, stats.expon(scale=0.5).cdf)


def test_gamma_variance():
    draws = RngStream(3).gamma(2.0, 2.0, size=1_000_000)
    assert draws.var() == pytest.approx(0.5, abs=0.01)


def test_gamma_invalid_params():
    s = RngStream(0)
    with pytest.raises(ValueError):
        s.gamma(0.0, 1.0)
    with pytest.raises(ValueError):
        s.gamma(1.0, -2.0)


def test_gamma_ks():
    draws = RngStream(4).gamma(2.5, 1.7, size=KS_N)
    assert ks_pass(draws, stats.gamma(a=2.5, scale=1 / 1.7).cdf)


# ----------------------------------------------------------------------
# inverse gamma


def test_inv_gamma_mean_matches_prior_interpretation():
    # shape 3, rate 20: mean 20 / (3 - 1) = 10
    draws = RngStream(5).inv_gamma(3.0, 20.0, size=1_000_000)
    assert draws.mean() == pytest.approx(10.0, abs=0.2)


def test_inv_gamma_is_reciprocal_of_gamma():
    a = RngStream(6).inv_gamma(2.0, 5.0, size=1000)
    b = RngStream(6).gamma(2.0, 5.0, size=1000)
    np.testing.assert_allclose(a, 1.0 / b, rtol=1e-15)


def test_inv_gamma_variance():
    # shape 3, rate 20: variance 20^2 / ((3-1)^2 (3-2)) = 100
    draws = RngStream(7).inv_gamma(3.0, 20.0, size=10_000_000)
    assert draws.var() == pytest.approx(100.0, abs=5.0)


def test_inv_gamma_ks():
    draws = RngStream(8).inv_gamma(3.0, 2.0, size=KS_N)
    assert ks_pass(draws, stats.invgamma(a=3.0, scale=2.0).cdf)


# ----------------------------------------------------------------------
# exponential


def test_exponential_mean():
    draws = RngStream(9).exponential(2.0, size=1_000_000)
    assert draws.mean() == pytest.approx(0.5, abs=0.005)


def test_exponential_rate_substitution():
    lam = 2.0
    draws = RngStream(10).exponential(lam**2 / 2.0, size=1_000_000)
    assert draws.mean() == pytest.approx(0.5, abs=0.005)


def test_exponential_quantiles_match_cdf():
    draws = RngStream(11).exponential(1.3, size=KS_N)
    for p in (0.1, 0.5, 0.9):
        assert np.quantile(draws, p) == pytest.approx(
            stats.expon(scale=1 / 1.3).ppf(p), rel=0.02
        )
    assert ks_pass(draws, stats.expon(scale=1 / 1.3).cdf)


def test_exponential_invalid_rate():
    with pytest.raises(ValueError):
        RngStream(0).exponential(0.0)


# ----------------------------------------------------------------------
# generalized inverse Gaussian


def gig_mean(p, a, b):
    omega = np.sqrt(a * b)
    return np.sqrt(b / a) * special.kve(p + 1, omega) / special.kve(p, omega)


def gig_var(p, a, b):
    omega = np.sqrt(a * b)
    m1 = gig_mean(p, a, b)
    m2 = (b / a) * special.kve(p + 2, omega) / special.kve(p, omega)
    return m2 - m1**2


def gig_cdf_numeric(p, a, b):
    def density(x):
        return x ** (p - 1.0) * np.exp(-(a * x + b / x) / 2.0)

    hi = gig_mean(p, a, b) + 40 * np.sqrt(max(gig_var(p, a, b), 1e-12))
    norm, _ = integrate.quad(density, 0, hi, limit=400)

    def cdf(x):
        x = np.atleast_1d(x)
        out = np.empty(x.shape)
        for i, xi in enumerate(x):
            val, _ = integrate.quad(density, 0, min(xi, hi), limit=400)
            out[i] = val / norm
        return out

    return cdf


def test_gig_half_unit_mean():
    s = RngStream(12)
    draws = np.array([s.gig(0.5, 1.0, 1.0) for _ in range(1_000_000 // 10)])
    # Bessel-ratio mean for p=1/2: sqrt(b/a) * (1 + 1/sqrt(ab)) = 2
    assert draws.mean() == pytest.approx(2.0, abs=0.02)


def test_gig_reciprocal_symmetry():
    # X ~ GIG(-1/2, a, b)  =>  1/X ~ GIG(1/2, b, a)
    a, b = 2.0, 3.0
    s = RngStream(13)
    draws = np.array([1.0 / s.gig(-0.5, a, b) for _ in range(200_000)])
    expect = gig_mean(0.5, b, a)
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - expect) < 4 * se


def test_gig_small_b_approaches_gamma():
    s = RngStream(14)
    draws = np.array([s.gig(2.0, 4.0, 1e-8) for _ in range(200_000)])
    # Gamma(2, rate 2) limit has mean 1
    assert draws.mean() == pytest.approx(1.0, abs=0.01)


def test_gig_invalid_params():
    s = RngStream(0)
    with pytest.raises(ValueError):
        s.gig(0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        s.gig(0.5, 1.0, -1.0)


@pytest.mark.parametrize("p", [-1.5, -0.5, 0.5, 2.0])
@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("b", [0.1, 1.0, 10.0])
def test_gig_moments_match_bessel_ratios(p, a, b):
    s = RngStream(hash((p, a, b)) % 2**32)
    n = 20_000
    draws = np.array([s.gig(p, a, b) for _ in range(n)])
    se_mean = draws.std(ddof=1) / np.sqrt(n)
    assert abs(draws.mean() - gig_mean(p, a, b)) < 3 * se_mean + 1e-9


@pytest.mark.parametrize("p,a,b", [(0.5, 1.0, 1.0), (-0.5, 2.0, 0.5), (2.0, 1.0, 3.0)])
def test_gig_ks_against_numeric_cdf(p, a, b):
    s = RngStream(15)
    draws = np.array([s.gig(p, a, b) for _ in range(KS_N)])
    assert ks_pass(draws, gig_cdf_numeric(p, a, b))


def test_gig_half_vector_matches_scalar_law():
    s = RngStream(16)
    a = np.full(200_000, 1.0)
    b = np.full(200_000, 1.0)
    draws = s.gig_half(a, b)
    assert draws.mean() == pytest.approx(2.0, abs=0.02)
    assert ks_pass(draws[:KS_N], gig_cdf_numeric(0.5, 1.0, 1.0))


def test_gig_half_zero_b_gamma_limit():
    s = RngStream(17)
    draws = s.gig_half(np.full(200_000, 4.0), np.zeros(200_000))
    # limit is Gamma(1/2, rate 2): mean 1/4
    assert draws.mean() == pytest.approx(0.25, abs=0.005)
    assert ks_pass(draws[:KS_N], stats.gamma(a=0.5, scale=0.5).cdf)


# ----------------------------------------------------------------------
# multivariate normal by precision


def test_mvn_identity_precision_standard_normal():
    s = RngStream(18)
    draws = s.mvn_precision(np.zeros(3), np.eye(3), size=KS_N)
    for k in range(3):
        assert ks_pass(draws[:, k], stats.norm.cdf)


def test_mvn_mean_is_precision_solve():
    s = RngStream(19)
    precision = np.array([[2.0, 0.0], [0.0, 4.0]])
    draws = s.mvn_precision(np.array([2.0, 4.0]), precision, size=1_000_000)
    np.testing.assert_allclose(draws.mean(axis=0), [1.0, 1.0], atol=0.01)


def test_mvn_covariance_matches_precision_inverse():
    s = RngStream(20)
    precision = np.array([[2.0, 0.7], [0.7, 1.5]])
    draws = s.mvn_precision(np.zeros(2), precision, size=1_000_000)
    cov = np.cov(draws.T)
    target = np.linalg.inv(precision)
    assert np.linalg.norm(cov - target) / np.linalg.norm(target) < 0.01


def test_mvn_rejects_non_spd():
    s = RngStream(21)
    with pytest.raises(np.linalg.LinAlgError):
        s.mvn_precision(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
