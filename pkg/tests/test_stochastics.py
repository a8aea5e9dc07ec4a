from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from admissibility_lab.errors import DimensionError, NumericalError
from admissibility_lab.stochastics import (
    BLOCK_SIZE,
    GaussianModel,
    Sample,
    block_ranges,
    draw_sample_means,
    draw_samples,
    iter_samples,
    marginal_of_mean,
    model_from_spec,
    model_to_spec,
    posterior_params,
    substream,
)


def test_model_validation():
    with pytest.raises(DimensionError):
        GaussianModel([0, 0], np.eye(3))
    with pytest.raises(NumericalError):
        GaussianModel([0, 0], [[1, 2], [2, 1]])
    with pytest.raises(NumericalError):
        GaussianModel([0, 0], [[1, 0.5], [0.4, 1]])
    with pytest.raises(ValueError):
        GaussianModel([0], [[1]], n=0)


def test_model_arrays_are_read_only():
    m = GaussianModel([0, 0], np.eye(2))
    with pytest.raises(ValueError):
        m.mu[0] = 1


def test_sample_mean_and_single_draw():
    s = Sample.from_draws([[1.0, 2.0], [3.0, 6.0]])
    np.testing.assert_array_equal(s.mean, [2.0, 4.0])
    assert s.n == 2 and s.dim == 2
    one = Sample.from_draws([[0.1, 0.2]])
    np.testing.assert_array_equal(one.mean, [0.1, 0.2])


def test_substreams_are_reproducible_and_distinct():
    a = substream(5, "x", 0).standard_normal(4)
    np.testing.assert_array_equal(a, substream(5, "x", 0).standard_normal(4))
    assert not np.array_equal(a, substream(5, "x", 1).standard_normal(4))
    assert not np.array_equal(a, substream(5, "y", 0).standard_normal(4))
    assert not np.array_equal(a, substream(6, "x", 0).standard_normal(4))


def test_block_ranges_cover():
    blocks = block_ranges(10_000)
    assert blocks[0] == (0, 0, BLOCK_SIZE)
    assert blocks[-1][2] == 10_000
    assert sum(stop - start for _, start, stop in blocks) == 10_000


def test_means_do_not_depend_on_workers():
    m = GaussianModel([1.0, -1.0], [[2.0, 0.3], [0.3, 1.0]], n=3)
    a = draw_sample_means(m, 7, 20_000, workers=1)
    b = draw_sample_means(m, 7, 20_000, workers=4)
    np.testing.assert_array_equal(a, b)


def test_means_prefix_stable():
    m = GaussianModel([0.0], [[1.0]], n=2)
    short = draw_sample_means(m, 1, 5000)
    long = draw_sample_means(m, 1, 9000)
    np.testing.assert_array_equal(short, long[:5000])


def test_iter_samples_agree_with_means():
    m = GaussianModel([0.5, 0.0], np.eye(2), n=4)
    means = draw_sample_means(m, 3, 50)
    got = np.array([s.mean for s in iter_samples(m, 3, 50)])
    np.testing.assert_allclose(got, means, rtol=0, atol=1e-14)


def test_common_random_numbers_across_states():
    m = GaussianModel([0.0, 0.0], np.eye(2), n=2)
    a = draw_sample_means(m, 0, 1000)
    b = draw_sample_means(m.with_mu([1.0, -2.0]), 0, 1000)
    np.testing.assert_allclose(b - a, np.tile([1.0, -2.0], (1000, 1)), atol=1e-12)


def test_sample_mean_distribution():
    sigma = np.array([[2.0, 0.6], [0.6, 1.0]])
    m = GaussianModel([1.0, -2.0], sigma, n=5)
    means = draw_sample_means(m, 2, 200_000)
    np.testing.assert_allclose(means.mean(axis=0), m.mu, atol=4 * np.sqrt(np.diag(sigma) / 5 / 200_000).max())
    np.testing.assert_allclose(np.cov(means, rowvar=False), sigma / 5, atol=0.01)
    # marginal of the first coordinate is normal
    z = (means[:, 0] - 1.0) / np.sqrt(2.0 / 5)
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_draw_samples_shape():
    m = GaussianModel([0, 0, 0], np.eye(3), n=7)
    s = draw_samples(m, substream(0))
    assert s.draws.shape == (7, 3)


def test_posterior_conjugate_scalar():
    # prior N(m0, s0), n draws with variance v: posterior precision 1/s0 + n/v
    m = GaussianModel([0.0], [[2.0]], n=4)
    mean, cov = posterior_params([1.0], [[3.0]], m, [0.5])
    prec = 1 / 3 + 4 / 2
    assert cov[0, 0] == pytest.approx(1 / prec)
    assert mean[0] == pytest.approx((1 / 3 * 1.0 + 4 / 2 * 0.5) / prec)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.integers(1, 50), st.floats(-3, 3))
def test_posterior_mean_is_shrunk_sample_mean(tau, n, x):
    # prior N(0, tau^2 sigma): posterior mean = s * xbar
    sigma = np.array([[1.5, 0.2], [0.2, 0.7]])
    m = GaussianModel([0, 0], sigma, n)
    xbar = np.array([x, -x / 2])
    mean, _ = posterior_params([0, 0], tau**2 * sigma, m, xbar)
    s = n * tau**2 / (n * tau**2 + 1)
    np.testing.assert_allclose(mean, s * xbar, rtol=1e-9, atol=1e-12)


def test_marginal_of_mean_by_simulation():
    sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    m = GaussianModel([0, 0], sigma, n=3)
    _, cov = marginal_of_mean(2.0, m)
    rng = np.random.default_rng(0)
    mu = rng.multivariate_normal([0, 0], 4.0 * sigma, size=200_000)
    xbar = mu + rng.multivariate_normal([0, 0], sigma / 3, size=200_000)
    np.testing.assert_allclose(np.cov(xbar, rowvar=False), cov, rtol=0.02)
    np.testing.assert_allclose(cov, (3 * 4 + 1) / 3 * sigma)


def test_model_spec_round_trip():
    m = model_from_spec({"mu": [1, 2], "sigma_diag": [1, 4], "n": 3})
    np.testing.assert_array_equal(m.sigma, np.diag([1.0, 4.0]))
    again = model_from_spec(model_to_spec(m))
    assert model_to_spec(again) == model_to_spec(m)
    with pytest.raises(ValueError):
        model_from_spec({"sigma": [[1]], "n": 1.5})
