import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from kakutani import closed_forms as cf
from kakutani.core import Watch, run
from kakutani.embeddings import (brw_batch, brw_extremes, brw_simulate, cmj_population,
                                 cmj_population_from_births, coupled_inversion_check,
                                 parking_count, parking_simulate, selfsimilar_batch,
                                 selfsimilar_sample, threshold_batch, threshold_times)
from kakutani.errors import InvalidThresholdError, RegimeError, ResourceError
from kakutani.rng import RandomStream

from conftest import mean_ci


def test_threshold_small_cases():
    res = threshold_times([1.0, 2.0, 0.9999], RandomStream(1))
    d = res.as_dict()
    assert d[1.0] == 0 and d[2.0] == 0 and d[0.9999] == 1
    assert list(res.thresholds) == sorted(res.thresholds)


@pytest.mark.parametrize("t", [0.0, -0.5])
def test_threshold_rejects_nonpositive(t):
    with pytest.raises(InvalidThresholdError):
        threshold_times([t])


def test_threshold_times_monotone_and_consistent():
    ts = [0.5, 0.1, 0.05, 0.01, 0.3]
    res, p = threshold_times(ts, RandomStream(2), return_path=True)
    assert np.all(np.diff(res.times) <= 0)     # smaller t, later crossing
    traj = p.trajectory()
    for t, n in zip(res.thresholds, res.times):
        assert traj[n] <= t and (n == 0 or traj[n - 1] > t)


def test_batch_matches_single():
    ts = [0.2, 0.05]
    b = threshold_batch(ts, 4, RandomStream(3))
    s = RandomStream(3)
    for i in range(4):
        r = threshold_times(ts, s)
        assert list(b[i]) == [r.as_dict()[0.2], r.as_dict()[0.05]]


@pytest.mark.parametrize("t", [0.5, 0.25, 0.1, 0.75])
def test_threshold_moments(t):
    x = threshold_batch([t], 200_000, RandomStream(4, int(100 * t)))[:, 0].astype(float)
    m, hw = mean_ci(x, 4.0)
    assert abs(m - cf.mu(t)) <= hw
    assert x.var(ddof=1) == pytest.approx(cf.v(t), rel=0.05)


def test_n_half_support():
    x = threshold_batch([0.5], 100_000, RandomStream(5))[:, 0]
    # M_1 = max(U, 1-U) > 1/2, so at least two splits are needed
    assert x.min() == 2


@given(st.integers(0, 1000))
def test_inversion_identity(seed):
    ok = coupled_inversion_check(np.arange(0, 60), [2.0, 0.9, 0.5, 0.1, 0.01], RandomStream(seed))
    assert ok.all()


def test_inversion_rejects_negative_n():
    with pytest.raises(RegimeError):
        coupled_inversion_check([-1], [0.5])


# below ~1e-16, exp(-tau) rounds to 1.0 and the two computations see different floats
@given(st.integers(0, 10**6), st.floats(1e-12, 6.0))
def test_cmj_embedding(seed, tau):
    a = cmj_population(tau, RandomStream(seed))
    b = cmj_population_from_births([tau], RandomStream(seed))[0]
    assert a == b


def test_cmj_zero_horizon():
    assert cmj_population(0.0, RandomStream(1)) == 0
    with pytest.raises(RegimeError):
        cmj_population(-1.0)


@given(st.integers(0, 10**6), st.floats(0.5, 30.0))
def test_parking_embedding(seed, x):
    assert parking_count(x, RandomStream(seed)) == threshold_times([1 / x], RandomStream(seed)).times[0]


def test_parking_direct_law_matches():
    s = RandomStream(7)
    a = np.array([parking_simulate(6.0, s) for _ in range(20000)])
    b = threshold_batch([1 / 6.0], 20000, RandomStream(8))[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 1e-3
    assert a.mean() == pytest.approx(cf.mu(1 / 6.0), rel=0.02)


@given(st.integers(0, 10**6), st.integers(1, 500))
def test_brw_embedding(seed, n):
    l1, r1 = brw_extremes(n, RandomStream(seed))
    l2, r2 = brw_simulate(n, RandomStream(seed))
    assert l1 == pytest.approx(l2, abs=1e-12) and r1 == pytest.approx(r2, abs=1e-12)
    assert l1 <= r1


def test_brw_batch_and_errors():
    left, right = brw_batch(100, 50, RandomStream(9))
    assert np.all(left <= right) and np.all(left > math.log(100) - 1)
    with pytest.raises(RegimeError):
        brw_extremes(0)


def test_selfsimilar_matches_threshold_law():
    a = selfsimilar_batch(0.2, 50_000, RandomStream(10))
    b = threshold_batch([0.2], 50_000, RandomStream(11))[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 1e-3
    assert selfsimilar_sample(1.0, RandomStream(1)) == 0


def test_selfsimilar_cap():
    with pytest.raises(ResourceError):
        selfsimilar_sample(1e-5, RandomStream(1), cap=100)
    with pytest.raises(InvalidThresholdError):
        selfsimilar_sample(0.0)
