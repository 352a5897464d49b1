import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from cwmdp.stats import (EmpiricalDistribution, decay_rate_fit, ks_distance, ks_threshold,
                         summary_json, wasserstein1)

finite = st.floats(-1e3, 1e3, allow_nan=False)
samples = st.lists(finite, min_size=1, max_size=40)


def test_ks_examples():
    a = np.random.default_rng(0).normal(size=100)
    assert ks_distance(a, a.copy()) == 0.0
    assert ks_distance([0.0], [1.0]) == 1.0
    with pytest.raises(ValueError):
        ks_distance([], [1.0])


def test_ks_threshold_formula():
    assert ks_threshold(10_000, 10_000) == pytest.approx(1.36 * math.sqrt(2 / 10_000))
    assert ks_threshold(100, 400, c=1.0) == pytest.approx(math.sqrt(500 / 40_000))


def test_ks_null_frequency():
    rng = np.random.default_rng(11)
    hits = sum(ks_distance(rng.normal(size=10_000), rng.normal(size=10_000)) < 0.0272
               for _ in range(100))
    assert hits >= 95


@pytest.mark.filterwarnings("ignore:ks_2samp:RuntimeWarning")
@settings(max_examples=200, deadline=None)
@given(samples, samples, samples)
def test_ks_symmetric_and_triangle(a, b, c):
    ab, ba = ks_distance(a, b), ks_distance(b, a)
    assert ab == ba
    assert 0.0 <= ab <= 1.0
    assert ab <= ks_distance(a, c) + ks_distance(c, b) + 1e-12


def test_wasserstein_examples():
    a = np.random.default_rng(1).normal(size=50)
    assert wasserstein1(a, a.copy()) == 0.0
    assert wasserstein1([0.0], [2.5]) == pytest.approx(2.5)
    rng = np.random.default_rng(2)
    w = wasserstein1(rng.normal(size=20_000), rng.normal(0.7, 1, size=20_000))
    assert abs(w - 0.7) < 0.05


@settings(max_examples=100, deadline=None)
@given(samples, samples)
def test_wasserstein_nonnegative(a, b):
    w = wasserstein1(a, b)
    assert w >= 0
    assert (w == 0) == (sorted(a) == sorted(b)) or w < 1e-9


def test_decay_fit_examples():
    r = np.array([2.0, 3.0, 5.0, 8.0])
    fit = decay_rate_fit(r, np.exp(-0.37 * r))
    assert fit.slope == pytest.approx(0.37, rel=1e-12)
    assert np.allclose(fit.rates, 0.37)
    assert decay_rate_fit(r, np.full(4, 0.2)).slope == pytest.approx(0.0, abs=1e-12)
    with pytest.warns(RuntimeWarning):
        fit = decay_rate_fit([1, 2, 3, 4], [0.5, 0.2, 0.0, 0.05])
    assert len(fit.speeds) == 3
    with pytest.raises(ValueError):
        decay_rate_fit([1, 2], [0.5, 0.1])


def test_decay_fit_stationary_exceedance_smoke():
    # exact stationary (Gibbs) law of the chain, subcritical beta, b_n = n^(1/4)
    beta, a = 0.5, 1.0
    speeds, probs = [], []
    for n in (4, 9, 16, 36, 64):
        j = np.arange(n + 1)
        m = (2.0 * j - n) / n
        logw = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1) + beta * n * m * m / 2
        w = np.exp(logw - logw.max())
        w /= w.sum()
        b = n**0.25
        probs.append(w[np.abs(b * m) > a].sum())
        speeds.append(n / b**2)
    assert np.allclose([min(speeds), max(speeds)], [2.0, 8.0])
    slope = decay_rate_fit(speeds, probs).slope
    S = (1 - beta) * a * a / 2
    assert abs(slope - S) <= 0.5 * S


def test_empirical_distribution():
    d = EmpiricalDistribution(np.array([3.0, 1.0, 2.0]))
    assert d.samples.tolist() == [1.0, 2.0, 3.0] and d.size == 3
    assert d.cdf(2.0) == pytest.approx(2 / 3)
    assert ks_distance(d, EmpiricalDistribution([1.0, 2.0, 3.0])) == 0.0
    with pytest.raises(ValueError):
        EmpiricalDistribution([1.0, np.nan])
    with pytest.raises(ValueError):
        EmpiricalDistribution([])
    s = summary_json(d.summary())
    assert s.endswith("\n") and '"n": 3' in s
