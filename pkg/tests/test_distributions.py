import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ks_2samp

from clsbp.distributions import (
    pg_density_truncated,
    pg_mean,
    sample_categorical,
    sample_inverse_gamma,
    sample_pg1,
    sample_pg1_many,
    sample_pg_series,
)
from clsbp.errors import DegenerateWeights

N = 100_000


def _mean_with_se(draws):
    return draws.mean(), draws.std(ddof=1) / np.sqrt(draws.size)


def test_pg_mean_at_zero_against_truncated_series():
    # analytic series for E at c=0: (1/2 pi^2) sum (n-1/2)^{-2} with 1e4 terms
    n = np.arange(1, 10_001)
    series_mean = (1.0 / (2.0 * np.pi**2)) * np.sum(1.0 / (n - 0.5) ** 2)
    assert abs(series_mean - 0.25) < 1e-4
    draws = sample_pg1_many(np.zeros(N), np.random.default_rng(1))
    m, se = _mean_with_se(draws)
    assert abs(m - 0.25) <= 3.0 * se


def test_pg_mean_at_two_against_series_monte_carlo():
    rng = np.random.default_rng(2)
    draws = sample_pg1_many(np.full(N, 2.0), rng)
    m, se = _mean_with_se(draws)
    assert abs(m - np.tanh(1.0) / 4.0) <= 3.0 * se
    # independent cross-check: weighted-gamma series representation
    series = sample_pg_series(2.0, rng, N, n_terms=200)
    ms, ses = _mean_with_se(series)
    # allow for the ~2.5e-4 truncation bias of a 200-term series
    assert abs(m - ms) <= 3.0 * np.hypot(se, ses) + 3e-4


def test_pg_symmetric_in_sign():
    rng = np.random.default_rng(3)
    plus = sample_pg1_many(np.full(N, 2.0), rng)
    minus = sample_pg1_many(np.full(N, -2.0), rng)
    assert ks_2samp(plus, minus).pvalue > 0.01


def test_pg_second_moment_matches_series_oracle():
    rng = np.random.default_rng(4)
    exact = sample_pg1_many(np.zeros(N), rng)
    series = sample_pg_series(0.0, rng, N, n_terms=200)
    m2, s2 = exact**2, series**2
    se = np.hypot(m2.std(ddof=1), s2.std(ddof=1)) / np.sqrt(N)
    assert abs(m2.mean() - s2.mean()) <= 3.0 * se + 3e-4


def test_pg_scalar_and_shapes():
    rng = np.random.default_rng(5)
    x = sample_pg1(0.5, rng)
    assert isinstance(x, float) and x > 0
    arr = sample_pg1_many(np.array([[0.0, 1.0], [2.0, -2.0]]), rng)
    assert arr.shape == (2, 2) and np.all(arr > 0)


def test_pg_reproducible():
    a = sample_pg1_many(np.linspace(-3, 3, 50), np.random.default_rng(9))
    b = sample_pg1_many(np.linspace(-3, 3, 50), np.random.default_rng(9))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0])
@pytest.mark.parametrize("c", [0.5, 2.0])
def test_pg_density_ratio_identity(x, c):
    ratio = pg_density_truncated(x, c, 200) / pg_density_truncated(x, 0.0, 200)
    assert abs(ratio - np.cosh(c / 2.0) * np.exp(-c * c * x / 2.0)) < 1e-8


def test_pg_density_normalizes():
    val, _ = quad(lambda x: pg_density_truncated(x, 0.0, 200), 1e-12, 5.0, limit=200)
    assert abs(val - 1.0) < 1e-4


def test_pg_density_partial_sums_alternate():
    x = 0.5
    limit = pg_density_truncated(x, 0.0, 200)
    partial = np.array([pg_density_truncated(x, 0.0, k) for k in range(1, 7)])
    signs = np.sign(partial - limit)
    # first term dominates and successive partial sums straddle the limit
    assert partial[0] > limit
    assert np.all(signs[:-1] * signs[1:] == -1)


def test_pg_mean_formula():
    assert pg_mean(0.0) == 0.25
    assert np.isclose(pg_mean(2.0), np.tanh(1.0) / 4.0)
    assert np.allclose(pg_mean(np.array([1.0, -1.0])), np.tanh(0.5) / 2.0)


def test_inverse_gamma_moment():
    rng = np.random.default_rng(6)
    draws = np.array([sample_inverse_gamma(3.0, 2.0, rng) for _ in range(2000)])
    draws = np.concatenate([draws, sample_inverse_gamma(3.0, np.full(N - 2000, 2.0), rng)])
    m, se = _mean_with_se(draws)
    assert abs(m - 1.0) <= 3.0 * se  # scale/(shape-1)


def test_inverse_gamma_support():
    rng = np.random.default_rng(7)
    x = sample_inverse_gamma(0.5, 0.5, rng)
    assert np.isfinite(x) and x > 0


def test_inverse_gamma_reciprocal_is_gamma():
    rng = np.random.default_rng(8)
    draws = sample_inverse_gamma(np.full(N, 3.0), 2.0, rng)
    rec = 1.0 / draws
    # Gamma(3, rate 2): mean 1.5, variance 0.75
    m, se = _mean_with_se(rec)
    assert abs(m - 1.5) <= 3.0 * se
    v = rec.var(ddof=1)
    se_v = np.sqrt((np.mean((rec - rec.mean()) ** 4) - v * v) / rec.size)
    assert abs(v - 0.75) <= 3.0 * se_v


def test_categorical_degenerate_cases():
    rng = np.random.default_rng(10)
    assert all(sample_categorical([1.0, 0.0, 0.0], rng) == 0 for _ in range(50))
    with pytest.raises(DegenerateWeights):
        sample_categorical([0.0, 0.0], rng)
    with pytest.raises(DegenerateWeights):
        sample_categorical([np.nan, 1.0], rng)
    with pytest.raises(ValueError):
        sample_categorical([-0.1, 1.1], rng)


def test_categorical_frequencies():
    rng = np.random.default_rng(11)
    half = np.array([sample_categorical([0.5, 0.5], rng) for _ in range(N)])
    se = np.sqrt(0.25 / N)
    assert abs(half.mean() - 0.5) <= 3.0 * se
    w = np.array([0.2, 0.3, 0.5])
    idx = np.array([sample_categorical(w, rng) for _ in range(N)])
    for k, wk in enumerate(w):
        freq = (idx == k).mean()
        assert abs(freq - wk) <= 3.0 * np.sqrt(wk * (1.0 - wk) / N)


def test_categorical_renormalizes():
    rng = np.random.default_rng(12)
    # sums to 2: renormalized internally
    idx = [sample_categorical([1.0, 1.0], rng) for _ in range(200)]
    assert set(idx) == {0, 1}
