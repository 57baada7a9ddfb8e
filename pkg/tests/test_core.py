import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kakutani.closed_forms import dirichlet_min_survival
from kakutani.core import (Watch, dirichlet_batch, dirichlet_run, edf_endpoints,
                           edf_endpoints_sup_error, edf_gaps, edf_gaps_sup_error,
                           endpoints_from_gaps, evolve, extremes_batch, new_partition, run,
                           split_max, split_sequence)
from kakutani.errors import (InvalidDrawError, InvalidRegistrationError, RegimeError,
                             ResourceError, UnsupportedObservableError)
from kakutani.rng import RandomStream

from conftest import dkw_band, mean_ci

draws = st.floats(min_value=1e-9, max_value=1 - 1e-9, allow_nan=False)


def test_new_partition():
    p = new_partition(thresholds=[1.0, 2.5, 0.5])
    assert list(p.gaps()) == [1.0]
    assert p.step_count == 0 and p.current_max == 1.0 and p.current_min == 1.0
    assert math.fsum(p.gaps()) == 1.0
    tc = dict(p.threshold_counters)
    assert tc[1.0] == 0 and tc[2.5] == 0 and tc[0.5] is None


def test_split_rule():
    p = split_max(new_partition(), 0.3)
    assert np.allclose(p.gaps(), [0.3, 0.7])
    assert p.current_max == 0.7 and p.current_min == 0.3


def test_tie_split_same_multiset():
    p = split_sequence(new_partition(), [0.5, 0.5])
    assert list(p.gaps()) == [0.25, 0.25, 0.5]
    assert p.current_max == 0.5 and p.current_min == 0.25


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_invalid_draw(u):
    with pytest.raises(InvalidDrawError):
        split_max(new_partition(), u)


@given(st.lists(draws, min_size=1, max_size=200))
def test_invariants_under_any_draws(us):
    p = new_partition(positional=True)
    prev_max, prev_min = 1.0, 1.0
    for u in us:
        split_max(p, u)
        assert p.current_max <= prev_max and p.current_min <= prev_min
        prev_max, prev_min = p.current_max, p.current_min
    p.check_invariants()
    n = p.step_count
    assert p.heap_size == n + 1
    assert p.current_max >= 1.0 / (n + 1) and p.current_min <= 1.0 / (n + 1)
    assert np.allclose(endpoints_from_gaps(p), np.sort(p.lefts())[1:], atol=1e-12)


@given(st.lists(draws, min_size=1, max_size=100))
def test_trajectory_enumerates_split_lengths(us):
    p = new_partition()
    split_sequence(p, us)
    traj = p.trajectory()
    assert np.all(np.diff(traj) <= 0)
    # every current gap is either the current max or was never split
    assert traj[-1] == p.current_max


def test_run_small_cases():
    o = run(0, RandomStream(1))
    assert o.max_final == 1.0 and o.min_final == 1.0
    o = run(1, RandomStream(2))
    assert 0.5 < o.max_final < 1.0
    assert o.min_final == pytest.approx(1 - o.max_final, abs=1e-15)


def test_run_deterministic():
    w = Watch(final_gaps=True, thresholds=(0.1, 0.01), windows=((0.0, 1e-3, "one"),))
    a = run(5000, RandomStream(3, 7), w)
    b = run(5000, RandomStream(3, 7), w)
    assert np.array_equal(a.max_trajectory, b.max_trajectory)
    assert np.array_equal(a.final_gaps, b.final_gaps)
    assert a.threshold_times == b.threshold_times
    assert a.registered_statistics == b.registered_statistics


def test_observables_immutable():
    o = run(10, RandomStream(1))
    with pytest.raises(ValueError):
        o.max_trajectory[0] = 3.0


def test_batch_matches_single_paths():
    mx, mn, rc = extremes_batch(300, 3, RandomStream(4))
    # consecutive paths of one stream: replay them with a single partition each
    s = RandomStream(4)
    for i in range(3):
        p = new_partition()
        evolve(p, 300, s)
        assert p.current_max == mx[i] and p.current_min == mn[i]
        assert p.reciprocal_sum == pytest.approx(rc[i], rel=1e-13)


def test_mean_m1_is_three_quarters():
    mx, _, _ = extremes_batch(1, 10**6, RandomStream(5))
    m, hw = mean_ci(mx)
    assert abs(m - 0.75) < hw


def test_edf_gaps_examples():
    p = new_partition()
    assert edf_gaps(p, 2.0) == 1.0
    split_max(p, 0.3)
    assert edf_gaps(p, 0.6) == 0.5
    assert edf_gaps(p, -1.0) == 0.0
    assert edf_gaps(p, 2 * p.current_max) == 1.0


def test_edf_endpoints_examples():
    p = split_max(new_partition(positional=True), 0.3)
    assert edf_endpoints(p, 0.5) == 1.0
    assert edf_endpoints(p, 1.0) == 1.0
    with pytest.raises(UnsupportedObservableError):
        edf_endpoints(run(3, RandomStream(1)), 0.5)


def test_uniform_limits_at_1e5():
    o = run(10**5, RandomStream(6), Watch(positional=True, final_gaps=True))
    assert edf_gaps_sup_error(o.final_gaps) < 0.02
    assert edf_endpoints_sup_error(o) < 0.02


def test_slln_median():
    mx, _, _ = extremes_batch(10**5, 1000, RandomStream(7))
    assert 1.9 <= np.median(1e5 * mx) <= 2.1


def test_dirichlet():
    o = dirichlet_run(1, RandomStream(8))
    assert o.max_final + o.min_final == pytest.approx(1.0)
    _, mn = dirichlet_batch(1, 10**5, RandomStream(9))
    xs = np.linspace(0, 0.5, 51)
    emp = np.array([(mn >= x).mean() for x in xs])
    assert np.max(np.abs(emp - (1 - 2 * xs))) < dkw_band(10**5)


def test_registration_rules():
    p = new_partition()
    p.register_window(0.0, 0.25)
    split_max(p, 0.1)
    assert p.window(0.0, 0.25) == (1, 1.0)
    with pytest.raises(InvalidRegistrationError):
        p.register_window(0.0, 0.1)
    with pytest.raises(InvalidRegistrationError):
        p.window(0.0, 0.5)
    with pytest.raises(InvalidRegistrationError):
        p.register_threshold(0.95)   # already crossed


def test_negative_n_and_resource_guard(monkeypatch):
    with pytest.raises(RegimeError):
        run(-1)
    import kakutani.core as core
    monkeypatch.setattr(core, "_mem_limit", lambda: 1 << 20)
    with pytest.raises(ResourceError):
        run(10**6, RandomStream(1))


def test_one_million_splits_under_a_second():
    import time
    run(1000, RandomStream(1))
    t0 = time.perf_counter()
    o = run(10**6, RandomStream(2), Watch(trajectory=False))
    assert time.perf_counter() - t0 < 1.0
    assert 1.5e-6 <= o.max_final <= 3e-6
