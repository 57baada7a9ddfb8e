"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest -m acceptance -s`` (or as part of the full run). Tolerances
are the ones the criteria state. Three statements fail on the process as
simulated; those tests are marked ``xfail(strict=True)`` so that the suite stays
green only while they keep failing at the stated tolerance.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from kakutani import closed_forms as cf
from kakutani.core import Watch, dirichlet_batch, extremes_batch, run
from kakutani.embeddings import (brw_extremes, brw_simulate, cmj_population,
                                 cmj_population_from_births, coupled_inversion_check,
                                 parking_count, threshold_batch, threshold_times)
from kakutani.gap_stats import conditional_batch, theta_oracle_batch
from kakutani.harness import run_figure1
from kakutani.rng import DEFAULT_SEED, RandomStream

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SEED = DEFAULT_SEED
LEFT_TARGET = (-2.066, -2.399, -2.730)
RIGHT_TARGET = (-4.06, -4.49, -4.71)


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def figure1_paper():
    t0 = time.perf_counter()
    res = run_figure1("paper", SEED, threads=8)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def figure1_ci():
    t0 = time.perf_counter()
    res = run_figure1("ci", SEED, threads=8)
    return res, time.perf_counter() - t0


def _panel_check(res, target, tol, slope_lo, slope_hi):
    means = [r.mean_log_ks for r in res.records]
    dev = max(abs(m - t) for m, t in zip(means, target))
    ok = dev <= tol and slope_lo <= res.fit.slope <= slope_hi
    detail = (f"means {', '.join(f'{m:.3f}' for m in means)} (max dev {dev:.3f}, tol {tol}); "
              f"slope {res.fit.slope:.3f} in [{slope_lo}, {slope_hi}]")
    return ok, detail


def test_1_figure1_left_panel(report, figure1_paper, figure1_ci):
    paper, t_paper = figure1_paper
    ci, t_ci = figure1_ci
    ok_p, d_p = _panel_check(paper["left"], LEFT_TARGET, 0.15, -0.58, -0.38)
    ok_c, d_c = _panel_check(ci["left"], LEFT_TARGET, 0.3, -0.58, -0.38)
    ok_t = t_paper <= 30 * 60 and t_ci <= 180
    ok = report(1, ok_p and ok_c and ok_t,
                f"paper profile: {d_p}, {t_paper:.0f}s; ci profile: {d_c}, {t_ci:.1f}s")
    assert ok


def test_2_figure1_right_panel(report, figure1_paper):
    paper, _ = figure1_paper
    ok, d = _panel_check(paper["right"], RIGHT_TARGET, 0.5, -0.65, -0.30)
    assert report(2, ok, f"paper profile: {d}")


def test_3_exact_moments_of_threshold_times(report):
    ts = [0.5, 0.25, 0.1, 0.75]
    t0 = time.perf_counter()
    x = threshold_batch(ts, 10**6, RandomStream(SEED, 3)).astype(float)
    wall = time.perf_counter() - t0
    ok, parts = wall <= 120, []
    for j, t in enumerate(ts):
        col = x[:, j]
        se = col.std(ddof=1) / math.sqrt(col.size)
        z = (col.mean() - cf.mu(t)) / se
        rel = col.var(ddof=1) / cf.v(t) - 1
        ok &= abs(z) <= 4 and abs(rel) <= 0.05
        parts.append(f"t={t}: z={z:+.2f}, var rel {rel:+.4f}")
    assert report(3, ok, "; ".join(parts) + f"; {wall:.1f}s")


def test_4_pathwise_inversion(report):
    ns = np.arange(1, 101)
    ts = [0.9, 0.5, 0.1, 0.01]
    t0 = time.perf_counter()
    bad = sum(int(np.count_nonzero(~coupled_inversion_check(ns, ts, RandomStream(SEED, i))))
              for i in range(10**4))
    wall = time.perf_counter() - t0
    again = coupled_inversion_check(ns, ts, RandomStream(SEED, 17))
    det = np.array_equal(again, coupled_inversion_check(ns, ts, RandomStream(SEED, 17)))
    ok = bad == 0 and wall <= 10 and det
    assert report(4, ok, f"{bad} violations over 10^4 paths x 100 n x 4 t; {wall:.1f}s")


def test_5_embedding_identities(report):
    rng = np.random.default_rng(SEED)
    taus = rng.uniform(0.0, 6.0, 100)
    direct = cmj_population_from_births(taus, RandomStream(SEED, 51))
    via_n = [threshold_times([math.exp(-tau)], RandomStream(SEED, 51)).times[0] for tau in taus]
    ok_cmj = list(direct) == via_n and all(
        cmj_population(tau, RandomStream(SEED, 51)) == n for tau, n in zip(taus[:20], via_n))
    xs = rng.uniform(0.5, 30.0, 100)
    ok_park = all(parking_count(x, RandomStream(SEED, 52)) ==
                  threshold_times([1 / x], RandomStream(SEED, 52)).times[0] for x in xs)
    worst = 0.0
    for i in range(200):
        n = int(rng.integers(1, 2000))
        l1, r1 = brw_extremes(n, RandomStream(SEED, 1000 + i))
        l2, r2 = brw_simulate(n, RandomStream(SEED, 1000 + i))
        worst = max(worst, abs(l1 - l2), abs(r1 - r2))
    ok = ok_cmj and ok_park and worst <= 1e-12
    assert report(5, ok, f"CMJ exact {ok_cmj}, parking exact {ok_park}, "
                         f"BRW max diff {worst:.2e} over 200 paths")


def _sup_survival_error(z, sf, lo, hi):
    """sup over [lo, hi] of |empirical Pr(Z > x) - sf(x)|, evaluated exactly."""
    z = np.sort(z)
    pts = z[(z >= lo) & (z <= hi)]
    n = z.size
    after = 1.0 - np.searchsorted(z, pts, side="right") / n
    before = 1.0 - np.searchsorted(z, pts, side="left") / n
    ends = np.array([lo, hi])
    at_ends = 1.0 - np.searchsorted(z, ends, side="right") / n
    return float(max(np.max(np.abs(after - sf(pts)), initial=0.0),
                     np.max(np.abs(before - sf(pts)), initial=0.0),
                     np.max(np.abs(at_ends - sf(ends)))))


def test_6_exponential_law_of_min_gap(report):
    n = 400
    _, mn, _ = extremes_batch(n, 10**5, RandomStream(SEED, 6))
    err = _sup_survival_error(n * n * mn / 2, lambda x: np.exp(-x), 0.0, 5.0)
    assert report(6, err <= 0.05, f"sup error {err:.4f} on [0, 5] (tol 0.05)")


@pytest.mark.xfail(strict=True, reason="theta_i depend on later draws; oracle variance is "
                                       "too large (see the decisions ledger)")
def test_7_small_gap_oracle_equivalence(report):
    d, o = theta_oracle_batch(200, 0.0, 1e-3, 10**5, RandomStream(SEED, 7))
    p = stats.ks_2samp(d, o).pvalue
    ok = report(7, p > 1e-3, f"KS p = {p:.3g} (need > 1e-3); mean {d.mean():.3f} vs "
                             f"{o.mean():.3f}, var {d.var():.3f} vs {o.var():.3f}")
    assert ok


@pytest.fixture(scope="module")
def cond_1e5():
    return conditional_batch(1000, 1e-4, 10**5, RandomStream(SEED, 8))


@pytest.mark.xfail(strict=True, reason="the stated S identity does not hold; the derived one "
                                       "S = (s0/2)K - (s0/2)R + W does (see ledger)")
def test_8a_stated_s_identity(report, cond_1e5):
    cb = cond_1e5
    stated = np.max(np.abs(cb.S - (0.5 * cf.S0 * cb.K_t + 0.5 * cb.R + cb.W)))
    derived = np.max(np.abs(cb.S - (0.5 * cf.S0 * cb.K_t - 0.5 * cf.S0 * cb.R + cb.W)))
    ok = report("8a", stated <= 1e-10,
                f"S = (s0/2)K + R/2 + W: max residual {stated:.3g} (tol 1e-10); "
                f"S = (s0/2)K - (s0/2)R + W: max residual {derived:.2e}")
    assert ok


def test_8b_conditional_bounds(report, cond_1e5):
    cb = cond_1e5
    bad_r = int(np.count_nonzero(np.abs(cb.R) > cb.K_t))
    bad_s = int(np.count_nonzero(np.abs(cb.S) > cf.S0 * cb.K_2t))
    derived = float(np.max(np.abs(cb.S - (0.5 * cf.S0 * cb.K_t - 0.5 * cf.S0 * cb.R + cb.W))))
    ok = bad_r == 0 and bad_s == 0 and derived <= 1e-10
    assert report("8b", ok, f"|R| <= K_t violations {bad_r}, |S| <= s0 K_2t violations {bad_s} "
                            f"over 10^5 paths; derived identity residual {derived:.2e}")


def _ci(x):
    m = x.mean()
    h = 1.96 * x.std(ddof=1) / math.sqrt(x.size)
    return m - h, m + h


def _var_ci(x):
    c = x - x.mean()
    v = np.mean(c**2)
    se = math.sqrt((np.mean(c**4) - v * v) / x.size)
    return v - 1.96 * se, v + 1.96 * se


def _overlap(a, b):
    return a[0] <= b[1] and b[0] <= a[1]


def test_9a_moment_identities(report):
    # own stream, independent of the criterion-8 sample
    cb = conditional_batch(1000, 1e-4, 10**5, RandomStream(SEED, 90))
    k3 = _ci(cb.K_t / 3.0)
    es = _ci(cb.S)
    vr = _var_ci(cb.R)
    ok = _overlap(es, k3) and _overlap(vr, k3)
    fmt = lambda c: f"[{c[0]:.3f}, {c[1]:.3f}]"
    assert report("9a", ok, f"E S {fmt(es)}, Var R {fmt(vr)}, E K/3 {fmt(k3)} (95% CIs)")


@pytest.fixture(scope="module")
def cond_mixed():
    n, t = 2000, 5e-5
    cb = conditional_batch(n, t, 10**6, RandomStream(SEED, 9))
    return cb, n * n * t / 6.0


def test_9b_even_mixed_moments(report, cond_mixed):
    cb, L = cond_mixed
    r20 = np.mean(cb.R**2) / L
    r21 = np.mean(cb.R**2 * cb.S) / L**2
    r40 = np.mean(cb.R**4) / (3 * L**2)
    r01 = np.mean(cb.S) / L
    ok = 0.85 <= r20 <= 1.15 and 0.7 <= r21 <= 1.3 and 0.7 <= r40 <= 1.3
    assert report("9b", ok, f"(2,0) {r20:.3f} in [0.85,1.15]; (2,1) {r21:.3f} in [0.7,1.3]; "
                            f"(4,0) {r40:.3f} in [0.7,1.3]; (0,1) {r01:.3f}")


@pytest.mark.xfail(strict=True, reason="E RS has leading term -(s0/2) n^2 t / 6, not "
                                       "+(1/2) n^2 t / 6 (see ledger)")
def test_9c_odd_mixed_moment(report, cond_mixed):
    cb, L = cond_mixed
    r11 = np.mean(cb.R * cb.S) / (0.5 * L)
    ok = report("9c", 0.7 <= r11 <= 1.3,
                f"(1,1) E RS / (L/2) = {r11:.3f} (window [0.7, 1.3]); "
                f"-s0 = {-cf.S0:.3f} is the value the derived identity predicts")
    assert ok


def test_10_dirichlet_comparator(report):
    n, paths = 50, 10**5
    _, mn = dirichlet_batch(n, paths, RandomStream(SEED, 10))
    err = _sup_survival_error(mn, lambda x: cf.dirichlet_min_survival(n, x), 0.0, 1.0 / (n + 1))
    band = math.sqrt(math.log(2 / 0.01) / (2 * paths))
    assert report(10, err <= band, f"sup error {err:.4f} vs 99% DKW band {band:.4f}")


def test_11_closed_form_identities(report):
    e1 = abs(cf.SIGMA2 - 2 * cf.S0)
    e2 = abs(cf.S0 - (2 / 3 - 2 * cf.GAMMA))
    e3 = abs(cf.gamma_by_quadrature() - cf.GAMMA)
    e4 = abs(cf.s_bound_integral() - (2 * math.log(2) - 17 / 12))
    ok = e1 <= 1e-15 and e2 <= 1e-15 and e3 <= 1e-8 and e4 <= 1e-8
    assert report(11, ok, f"|sigma2 - 2 s0| {e1:.1e}, |s0 - (2/3 - 2 gamma)| {e2:.1e}, "
                          f"gamma quadrature {e3:.1e}, S-bound integral {e4:.1e}")


def test_12_analytic_sweeps(report):
    cramer = [k for k in range(1, 31) if not cf.cramer_bound_check(k).satisfied]
    grid = np.linspace(-0.3, 0.3, 13)
    edge = [(m, z, a) for m in (1, 2, 3) for z in grid for a in grid
            if not cf.edgeworth_expansion_check(m, float(z), float(a)).satisfied]
    binom = [(n, a, b) for n in range(1, 31) for a in range(7) for b in range(7 - a)
             if max(a, b) >= 1 and not cf.binom_product_check(n, a, b).satisfied]
    psum = [(d, n, k) for d in ("uniform", "w_transform") for n in range(1, 1001)
            for k in range(1, 5) if not cf.partial_sum_check(d, n, k).satisfied]
    ok = not (cramer or edge or binom or psum)
    assert report(12, ok, f"violations: Cramer {len(cramer)}/30, Edgeworth {len(edge)}/507, "
                          f"binomial-product {len(binom)}, partial sums {len(psum)}/8000")


def test_13_reciprocal_moment_decay(report):
    ok, parts = True, []
    for j, n in enumerate((10**2, 10**3, 10**4)):
        _, _, rc = extremes_batch(n, 10**4, RandomStream(SEED, 130 + j))
        val = math.sqrt(n) * float(np.mean(np.abs(4 * rc / n**2 - 1)))
        ok &= val <= 5
        parts.append(f"n={n}: {val:.3f}")
    assert report(13, ok, "sqrt(n) mean|4W/n^2 - 1|: " + ", ".join(parts) + " (tol 5)")


def test_14_performance_and_thread_invariance(report, figure1_ci):
    run(1000, RandomStream(1))
    t0 = time.perf_counter()
    run(10**6, RandomStream(SEED, 14), Watch(trajectory=False))
    t_split = time.perf_counter() - t0
    ci8, t_ci = figure1_ci
    ci1 = run_figure1("ci", SEED, threads=1)
    inv = all(ci1[p].same_numbers(ci8[p]) for p in ("left", "right"))
    ok = t_split <= 1.0 and t_ci <= 300 and inv
    assert report(14, ok, f"10^6 splits {t_split:.2f}s; ci profile {t_ci:.1f}s; "
                          f"threads 1 vs 8 identical: {inv}")
