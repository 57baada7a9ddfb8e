"""Property suite behind ``kakutani verify``.

Each group returns a list of :class:`Check`. Groups in ``DISCREPANCY_GROUPS``
test statements that are known not to hold for the process as simulated; they
are run and reported, but only affect the exit status under ``strict``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from . import closed_forms as cf
from .embeddings import (brw_extremes, brw_simulate, cmj_population_from_births,
                         coupled_inversion_check, parking_count, selfsimilar_batch,
                         threshold_batch, threshold_times)
from .gap_stats import conditional_batch, theta_oracle_batch
from .rng import DEFAULT_SEED, RandomStream


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def _close(name, got, want, tol) -> Check:
    return Check(name, abs(got - want) <= tol, f"got {got!r}, want {want!r} (tol {tol:g})")


def group_constants(seed: int, quick: bool) -> list[Check]:
    out = [
        _close("sigma2 = 2 s0", cf.SIGMA2, 2 * cf.S0, 1e-15),
        _close("s0 = 2/3 - 2 gamma", cf.S0, 2 / 3 - 2 * cf.GAMMA, 1e-15),
        _close("gamma by quadrature", cf.gamma_by_quadrature(), cf.GAMMA, 1e-10),
        _close("w-integral = 2 log 2 - 17/12", cf.s_bound_integral(), cf.S_BOUND_INTEGRAL, 1e-8),
        _close("v(0.75)", cf.v(0.75), 0.624164, 1e-6),
        _close("w(0.75)", cf.w(0.75), -0.102739, 1e-6),
        _close("v(1/2) = sigma2", cf.v(0.5), cf.SIGMA2, 1e-15),
        _close("v seam at 1/2", cf.v(0.5 + 1e-10) - cf.v(0.5 - 1e-10), 0.0, 1e-9),
    ]
    grid = np.linspace(0.0, 1.0, 2_000_001)[:-1]
    sup_w = float(np.max(np.abs(cf.w_array(grid))))
    out.append(_close("sup |w| -> s0", sup_w, cf.S0, 1e-6))
    return out


def group_inversion(seed: int, quick: bool) -> list[Check]:
    paths = 500 if quick else 10_000
    ns = np.arange(0, 101)
    ts = [2.0, 0.9, 0.5, 0.1, 0.01]
    bad = 0
    for i in range(paths):
        bad += int(np.count_nonzero(~coupled_inversion_check(ns, ts, RandomStream(seed, i))))
    return [Check("{M_n <= t} == {N_t <= n}", bad == 0, f"{bad} violations over {paths} paths")]


def group_embeddings(seed: int, quick: bool) -> list[Check]:
    rng = np.random.default_rng(seed)
    taus = rng.uniform(0.0, 6.0, 100)
    direct = cmj_population_from_births(taus, RandomStream(seed, 1))
    via_n = np.array([threshold_times([math.exp(-tau)], RandomStream(seed, 1)).times[0]
                      for tau in taus])
    out = [Check("T_tau from births = N_exp(-tau)", bool(np.all(direct == via_n)))]
    xs = rng.uniform(0.5, 30.0, 50)
    park = [parking_count(x, RandomStream(seed, 2)) for x in xs]
    via_n = [threshold_times([1.0 / x], RandomStream(seed, 2)).times[0] for x in xs]
    out.append(Check("P_0x = N_1/x", park == via_n))
    worst = 0.0
    for i in range(50):
        l1, r1 = brw_extremes(300, RandomStream(seed, 100 + i))
        l2, r2 = brw_simulate(300, RandomStream(seed, 100 + i))
        worst = max(worst, abs(l1 - l2), abs(r1 - r2))
    out.append(Check("BRW extremes = log 1/M_n, log 1/m_n", worst <= 1e-12, f"max diff {worst:g}"))
    return out


def group_oracles(seed: int, quick: bool) -> list[Check]:
    size = 20_000 if quick else 100_000
    a = selfsimilar_batch(0.2, size, RandomStream(seed, 10))
    b = threshold_batch([0.2], size, RandomStream(seed, 11))[:, 0]
    p = stats.ks_2samp(a, b).pvalue
    out = [Check("recursion sampler ~ threshold times (t=0.2)", p > 1e-3, f"KS p = {p:.3g}")]
    cb = conditional_batch(1000, 1e-4, 2_000 if quick else 20_000, RandomStream(seed, 12))
    resid = np.abs(cb.S - (0.5 * cf.S0 * cb.K_t - 0.5 * cf.S0 * cb.R + cb.W)).max()
    out.append(Check("S = (s0/2)K - (s0/2)R + W", resid <= 1e-10, f"max residual {resid:.3g}"))
    out.append(Check("|R| <= K_t", bool(np.all(np.abs(cb.R) <= cb.K_t))))
    out.append(Check("|S| <= s0 K_2t", bool(np.all(np.abs(cb.S) <= cf.S0 * cb.K_2t))))
    return out


def group_bounds(seed: int, quick: bool) -> list[Check]:
    out = []
    bad = [k for k in range(1, 31) if not cf.cramer_bound_check(k).satisfied]
    out.append(Check("Cramer bound k <= 30", not bad, f"violations at k={bad}"))
    grid = np.linspace(-0.3, 0.3, 7 if quick else 13)
    bad = [(m, z, a) for m in (1, 2, 3) for z in grid for a in grid
           if not cf.edgeworth_expansion_check(m, float(z), float(a)).satisfied]
    out.append(Check("Edgeworth expansion bound m <= 3", not bad, f"violations {bad[:3]}"))
    return out


def group_appendix(seed: int, quick: bool) -> list[Check]:
    bad = [(n, a, b) for n in range(1, 31) for a in range(0, 7) for b in range(0, 7 - a)
           if max(a, b) >= 1 and not cf.binom_product_check(n, a, b).satisfied]
    out = [Check("binomial-product bound n <= 30, a+b <= 6", not bad, f"violations {bad[:3]}")]
    ns = (1, 2, 5, 10, 100, 1000)
    for dist in ("uniform", "w_transform"):
        bad = [(n, k) for n in ns for k in range(1, 5)
               if not cf.partial_sum_check(dist, n, k).satisfied]
        out.append(Check(f"partial-sum moment bounds ({dist})", not bad, f"violations {bad}"))
    return out


def group_quoted(seed: int, quick: bool) -> list[Check]:
    """Statements recorded as discrepancies: checked faithfully, expected to fail."""
    cb = conditional_batch(1000, 1e-4, 2_000, RandomStream(seed, 20))
    resid = np.abs(cb.S - (0.5 * cf.S0 * cb.K_t + 0.5 * cb.R + cb.W)).max()
    out = [Check("S = (s0/2)K + R/2 + W (quoted form)", resid <= 1e-10,
                 f"max residual {resid:.3g}")]
    d, o = theta_oracle_batch(200, 0.0, 1e-3, 20_000 if quick else 100_000,
                              RandomStream(seed, 21))
    p = stats.ks_2samp(d, o).pvalue
    out.append(Check("K_n,t ~ theta oracle (n=200, t=1e-3)", p > 1e-3,
                     f"KS p = {p:.3g}; var {d.var():.3f} vs {o.var():.3f}"))
    return out


GROUPS: dict[str, Callable[[int, bool], list[Check]]] = {
    "constants": group_constants,
    "inversion": group_inversion,
    "embeddings": group_embeddings,
    "oracles": group_oracles,
    "bounds": group_bounds,
    "appendix": group_appendix,
    "quoted": group_quoted,
}
DISCREPANCY_GROUPS = {"quoted"}


def run_verify(groups=None, seed: int = DEFAULT_SEED, quick: bool = False,
               strict: bool = False, echo: Callable[[str], None] = print) -> bool:
    names = list(groups) if groups else list(GROUPS)
    all_ok = True
    for name in names:
        checks = GROUPS[name](seed, quick)
        ok = all(c.passed for c in checks)
        counts = not (name in DISCREPANCY_GROUPS and not strict)
        tag = "PASS" if ok else ("FAIL" if counts else "XFAIL")
        echo(f"[{tag}] {name}")
        for c in checks:
            if not c.passed or name in DISCREPANCY_GROUPS:
                echo(f"    {'ok ' if c.passed else 'bad'} {c.name}: {c.detail}")
        if counts:
            all_ok &= ok
    return all_ok
