"""Threshold times and the branching / parking translations of the process.

N_t is the first step at which every gap is <= t. Because the maximum is
non-increasing, {M_n <= t} and {N_t <= n} are the same event on every path, and
the maps below (CMJ population, branching random walk, parking) are all read off
the same path through that inversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .core import GapPartition, Watch, evolve_until, run
from .errors import InvalidThresholdError, RegimeError, ResourceError
from .rng import RandomStream, as_stream

SELFSIMILAR_NODE_CAP = 10**6


@dataclass(frozen=True)
class ThresholdResult:
    thresholds: np.ndarray     # ascending
    times: np.ndarray          # N_t in the same order

    def __post_init__(self):
        self.thresholds.flags.writeable = False
        self.times.flags.writeable = False

    def as_dict(self) -> dict:
        return {float(t): int(n) for t, n in zip(self.thresholds, self.times)}


def _check_thresholds(ts) -> np.ndarray:
    ts = np.asarray(ts, dtype=float).ravel()
    if ts.size and not np.all(ts > 0):
        raise InvalidThresholdError("thresholds must be > 0 (N_t is a.s. infinite at t <= 0)")
    return ts


def threshold_times(ts: Sequence[float], rng=None, return_path: bool = False):
    """N_t for every t in ts from a single path run until M_n <= min(ts).

    With ``return_path=True`` also returns the :class:`GapPartition` (with its
    max trajectory) that produced the times.
    """
    ts = _check_thresholds(ts)
    rng = as_stream(rng)
    order = np.argsort(ts, kind="stable")
    sorted_ts = ts[order]
    p = GapPartition(record_trajectory=return_path,
                     capacity=int(min(4.0 / sorted_ts[0] + 64, 1 << 24)) if ts.size else 16)
    for t in sorted_ts:
        p.register_threshold(t)
    if ts.size:
        evolve_until(p, float(sorted_ts[0]), rng)
    lookup = {t: n for t, n in p.threshold_counters}
    times = np.array([lookup[float(t)] for t in sorted_ts], dtype=np.int64)
    res = ThresholdResult(sorted_ts.copy(), times)
    return (res, p) if return_path else res


def threshold_batch(ts: Sequence[float], paths: int, rng=None) -> np.ndarray:
    """(paths, len(ts)) array of N_t, one row per consecutive path of the stream."""
    ts = _check_thresholds(ts)
    rng = as_stream(rng)
    order = np.argsort(-ts, kind="stable")
    desc = np.ascontiguousarray(ts[order])
    out = np.zeros((int(paths), ts.size), dtype=np.int64)
    if ts.size == 0:
        return out
    cnt = np.zeros(1, dtype=np.int64)
    K.batch_thresholds(rng.generator, desc, int(paths), out, cnt)
    rng.advance_counter(int(cnt[0]))
    res = np.empty_like(out)
    res[:, order] = out
    return res


def coupled_inversion_check(ns: Sequence[int], ts: Sequence[float], rng=None) -> np.ndarray:
    """Boolean grid [i, j]: (M_{n_i} <= t_j) == (N_{t_j} <= n_i) on one path."""
    ts = _check_thresholds(ts)
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size and ns.min() < 0:
        raise RegimeError("step counts must be >= 0")
    rng = as_stream(rng)
    n_max = int(ns.max()) if ns.size else 0
    obs = run(n_max, rng, Watch(trajectory=True, thresholds=tuple(ts)))
    traj = obs.max_trajectory
    # the path only tells N_t if it crossed within n_max; otherwise N_t > n_max
    nt = np.array([obs.threshold_times[float(t)] if obs.threshold_times[float(t)] is not None
                   else n_max + 1 for t in ts], dtype=np.int64)
    ev_m = traj[ns][:, None] <= ts[None, :]
    ev_n = nt[None, :] <= ns[:, None]
    return ev_m == ev_n


def cmj_population(tau: float, rng=None) -> int:
    """T_tau, the number of births before time tau, read as N_{exp(-tau)}."""
    if tau < 0:
        raise RegimeError(f"horizon must be >= 0, got {tau}")
    return int(threshold_times([math.exp(-tau)], rng).times[0])


def cmj_population_from_births(taus: Sequence[float], rng=None) -> np.ndarray:
    """T_tau for each tau counted directly from the birth times -log M_k < tau."""
    taus = np.asarray(taus, dtype=float)
    if taus.size and taus.min() < 0:
        raise RegimeError("horizons must be >= 0")
    rng = as_stream(rng)
    t_min = math.exp(-float(taus.max())) if taus.size else 1.0
    p = GapPartition(record_trajectory=True)
    evolve_until(p, t_min, rng)
    births = -np.log(p.trajectory())
    return np.array([np.count_nonzero(births < tau) for tau in taus], dtype=np.int64)


def cmj_batch(taus: Sequence[float], paths: int, rng=None) -> np.ndarray:
    return threshold_batch(np.exp(-np.asarray(taus, dtype=float)), paths, rng)


def brw_extremes(n: int, rng=None) -> tuple[float, float]:
    """(l_n, r_n) = (log 1/M_n, log 1/m_n) for one path of n steps."""
    if n < 1:
        raise RegimeError(f"need n >= 1, got {n}")
    obs = run(n, rng, Watch(trajectory=False))
    return -math.log(obs.max_final), -math.log(obs.min_final)


def brw_simulate(n: int, rng=None) -> tuple[float, float]:
    """Leftmost and rightmost particles of the branching random walk itself.

    Offspring displacements are -log U and -log(1-U) for one shared U, the
    correlated pair the embedding produces.
    """
    if n < 1:
        raise RegimeError(f"need n >= 1, got {n}")
    rng = as_stream(rng)
    cnt = np.zeros(1, dtype=np.int64)
    left, right = K.brw_direct(rng.generator, int(n), cnt)
    rng.advance_counter(int(cnt[0]))
    return float(left), float(right)


def brw_batch(n: int, paths: int, rng=None) -> tuple[np.ndarray, np.ndarray]:
    from .core import extremes_batch
    mx, mn, _ = extremes_batch(n, paths, rng)
    return -np.log(mx), -np.log(mn)


def parking_count(x: float, rng=None) -> int:
    """P_{0,x}: zero-length cars parked at jamming on a kerb of length x, = N_{1/x}."""
    if not x > 0:
        raise RegimeError(f"kerb length must be > 0, got {x}")
    return int(threshold_times([1.0 / x], rng).times[0])


def parking_simulate(x: float, rng=None) -> int:
    """Direct kerb simulation: a car at Unif(0,x) parks iff its gap exceeds 1."""
    if not x > 0:
        raise RegimeError(f"kerb length must be > 0, got {x}")
    rng = as_stream(rng)
    cnt = np.zeros(1, dtype=np.int64)
    out = K.parking_direct(rng.generator, float(x), cnt)
    rng.advance_counter(int(cnt[0]))
    return int(out)


def selfsimilar_sample(t: float, rng=None, cap: int = SELFSIMILAR_NODE_CAP) -> int:
    """N_t from the recursive distributional equation, never building a partition."""
    if not t > 0:
        raise InvalidThresholdError(f"threshold must be > 0, got {t}")
    rng = as_stream(rng)
    cnt = np.zeros(1, dtype=np.int64)
    out = K.selfsimilar(rng.generator, float(t), int(cap), cnt)
    rng.advance_counter(int(cnt[0]))
    if out < 0:
        raise ResourceError(f"recursion exceeded {cap} nodes at t={t}")
    return int(out)


def selfsimilar_batch(t: float, size: int, rng=None, cap: int = SELFSIMILAR_NODE_CAP
                      ) -> np.ndarray:
    if not t > 0:
        raise InvalidThresholdError(f"threshold must be > 0, got {t}")
    rng = as_stream(rng)
    out = np.empty(int(size), dtype=np.int64)
    cnt = np.zeros(1, dtype=np.int64)
    K.batch_selfsimilar(rng.generator, float(t), int(cap), out, cnt)
    rng.advance_counter(int(cnt[0]))
    if size and out.min() < 0:
        raise ResourceError(f"recursion exceeded {cap} nodes at t={t}")
    return out
