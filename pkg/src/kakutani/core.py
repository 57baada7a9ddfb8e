"""The splitting engine.

A :class:`GapPartition` holds the current gap lengths in a binary max-heap and a
handful of monotone trackers. Each split replaces the maximal gap ``M`` by
``u*M`` and ``(1-u)*M``. Positions are not stored unless the partition was
created with ``positional=True``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import (DegeneratePathError, InvalidDrawError, InvalidRegistrationError,
                     RegimeError, ResourceError, UnsupportedObservableError)
from .rng import RandomStream, as_stream

# name -> kernel weight code; the weight is applied to L/t for a gap L in (s, t]
WEIGHT_CODES = {
    "one": K.W_ONE,
    "r_weight": K.W_R,
    "half": K.W_HALF,
    "identity": K.W_ID,
    "w_slab": K.W_SLAB,
}

_EMPTY_F = np.empty(0)
_EMPTY_I = np.empty(0, dtype=np.int64)
_DUMMY_GEN = np.random.default_rng(0)


def _mem_limit() -> int:
    try:
        return int(0.8 * os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES"))
    except (ValueError, OSError, AttributeError):
        return 1 << 34


def _alloc(n: int) -> np.ndarray:
    if n * 8 > _mem_limit():
        raise ResourceError(f"cannot allocate {n} gap slots ({n * 8 / 2**30:.1f} GiB)")
    try:
        return np.empty(n)
    except MemoryError as exc:
        raise ResourceError(f"cannot allocate {n} gap slots") from exc


def _grow(arr: np.ndarray, n: int) -> np.ndarray:
    if arr.shape[0] >= n:
        return arr
    new = _alloc(max(n, 2 * arr.shape[0]))
    new[:arr.shape[0]] = arr
    return new


class GapPartition:
    """Live state of the splitting process.

    Construct with :func:`new_partition`. Thresholds and small-gap windows are
    registered up front and then maintained incrementally on every split.
    """

    def __init__(self, positional: bool = False, record_trajectory: bool = True,
                 capacity: int = 16):
        capacity = max(int(capacity), 4)
        self.positional = bool(positional)
        self.record_trajectory = bool(record_trajectory)
        self._heap = _alloc(capacity)
        self._heap[0] = 1.0
        self._lefts = np.zeros(capacity) if positional else _EMPTY_F
        self._ist = np.zeros(5, dtype=np.int64)
        self._ist[K.I_SIZE] = 1
        self._fst = np.array([1.0, 0.0])
        self._traj = _alloc(capacity) if record_trajectory else _EMPTY_F
        if record_trajectory:
            self._traj[0] = 1.0
        self._thr = _EMPTY_F
        self._thr_times = _EMPTY_I
        self._reg_s = _EMPTY_F
        self._reg_t = _EMPTY_F
        self._reg_code = _EMPTY_I
        self._reg_names: list[str] = []
        self._reg_count = _EMPTY_I
        self._reg_sum = _EMPTY_F

    # ----------------------------------------------------------- properties
    @property
    def step_count(self) -> int:
        return int(self._ist[K.I_STEP])

    @property
    def heap_size(self) -> int:
        return int(self._ist[K.I_SIZE])

    @property
    def current_max(self) -> float:
        return float(self._heap[0])

    @property
    def current_min(self) -> float:
        return float(self._fst[K.F_MIN])

    @property
    def reciprocal_sum(self) -> float:
        """sum_{j < n} 1/M_j over the steps taken so far."""
        return float(self._fst[K.F_RECIP])

    @property
    def draws(self) -> int:
        return int(self._ist[K.I_DRAWS])

    @property
    def heap(self) -> np.ndarray:
        """Read-only view of the gap lengths in heap order."""
        v = self._heap[:self.heap_size]
        v = v.view()
        v.flags.writeable = False
        return v

    @property
    def threshold_counters(self) -> list[tuple[float, Optional[int]]]:
        return [(float(t), (int(n) if n >= 0 else None))
                for t, n in zip(self._thr, self._thr_times)]

    @property
    def small_gap_counters(self) -> list[tuple[tuple[float, float], str, int, float]]:
        return [((float(s), float(t)), name, int(c), float(v)) for s, t, name, c, v in
                zip(self._reg_s, self._reg_t, self._reg_names, self._reg_count, self._reg_sum)]

    def gaps(self) -> np.ndarray:
        """Gap lengths sorted ascending."""
        return np.sort(self._heap[:self.heap_size])

    def lefts(self) -> np.ndarray:
        """Left endpoints, in the same heap order as :attr:`heap`."""
        if not self.positional:
            raise UnsupportedObservableError("partition was created without positions")
        return self._lefts[:self.heap_size].copy()

    def trajectory(self) -> np.ndarray:
        if not self.record_trajectory:
            raise UnsupportedObservableError("trajectory recording is off")
        return self._traj[:self.step_count + 1].copy()

    # --------------------------------------------------------- registration
    def register_threshold(self, t: float) -> None:
        t = float(t)
        if not t > 0:
            from .errors import InvalidThresholdError
            raise InvalidThresholdError(f"threshold must be > 0, got {t}")
        if t in set(self._thr.tolist()):
            return
        if self.step_count > 0 and self.current_max <= t:
            raise InvalidRegistrationError(
                f"threshold {t} already crossed before registration; N_t is unknown")
        thr = np.concatenate([self._thr, [t]])
        times = np.concatenate([self._thr_times, [-1]]).astype(np.int64)
        order = np.argsort(-thr, kind="stable")
        self._thr = np.ascontiguousarray(thr[order])
        self._thr_times = np.ascontiguousarray(times[order])
        if self.step_count == 0:
            self._thr_times[:] = -1
        self._ist[K.I_THR] = int(np.count_nonzero(self._thr_times >= 0))
        if self.step_count == 0:
            K._thr_update(self.current_max, self._ist, self._thr, self._thr_times)

    def register_window(self, s: float, t: float, weight: str = "one") -> None:
        if self.step_count != 0:
            raise InvalidRegistrationError("small-gap windows must be registered at step 0")
        if weight not in WEIGHT_CODES:
            raise InvalidRegistrationError(f"unknown weight {weight!r}")
        s, t = float(s), float(t)
        if not (0 <= s < t):
            raise InvalidRegistrationError(f"need 0 <= s < t, got ({s}, {t}]")
        for s2, t2, nm in zip(self._reg_s, self._reg_t, self._reg_names):
            if (s2, t2, nm) == (s, t, weight):
                return
        self._reg_s = np.append(self._reg_s, s)
        self._reg_t = np.append(self._reg_t, t)
        self._reg_code = np.append(self._reg_code, WEIGHT_CODES[weight]).astype(np.int64)
        self._reg_names.append(weight)
        inside = s < 1.0 <= t
        self._reg_count = np.append(self._reg_count, int(inside)).astype(np.int64)
        self._reg_sum = np.append(
            self._reg_sum, K.weight(WEIGHT_CODES[weight], 1.0 / t) if inside else 0.0)

    def window(self, s: float, t: float, weight: str = "one") -> tuple[int, float]:
        """(count, weighted sum) for a registered window."""
        for i, (s2, t2, nm) in enumerate(zip(self._reg_s, self._reg_t, self._reg_names)):
            if s2 == s and t2 == t and nm == weight:
                return int(self._reg_count[i]), float(self._reg_sum[i])
        raise InvalidRegistrationError(f"window ({s}, {t}] with weight {weight!r} "
                                       "was not registered")

    # -------------------------------------------------------------- stepping
    def _reserve(self, extra: int) -> None:
        need = self.heap_size + extra + 1
        self._heap = _grow(self._heap, need)
        if self.positional:
            self._lefts = _grow(self._lefts, need)
        if self.record_trajectory:
            self._traj = _grow(self._traj, self.step_count + extra + 1)

    def _advance(self, n_steps: int, gen, us, stop_below: float = -1.0) -> int:
        self._reserve(n_steps)
        done = K.evolve(self._heap, self._lefts, self.positional, self._ist, self._fst,
                        n_steps, gen if gen is not None else _DUMMY_GEN,
                        us if us is not None else _EMPTY_F, gen is not None, stop_below,
                        self._traj, self.record_trajectory, self._thr, self._thr_times,
                        self._reg_s, self._reg_t, self._reg_code,
                        self._reg_count, self._reg_sum)
        if self._ist[K.I_DEGEN]:
            raise DegeneratePathError(f"gap below {K.TINY:g} at step {self.step_count}")
        return int(done)

    def check_invariants(self, tol: float = 1e-12) -> None:
        gaps = self._heap[:self.heap_size]
        total = math.fsum(gaps)
        assert abs(total - 1.0) <= tol, f"gap sum {total!r} != 1"
        assert self.heap_size == self.step_count + 1
        assert self.current_max == gaps.max()
        assert self.current_min == gaps.min()
        if self.step_count >= 1:
            assert self.current_max >= 1.0 / (self.step_count + 1)
        if self.positional:
            order = np.argsort(self._lefts[:self.heap_size])
            ends = self._lefts[order] + gaps[order]
            assert self._lefts[order][0] == 0.0
            assert np.allclose(ends[:-1], self._lefts[order][1:], rtol=0, atol=1e-12)

    def __repr__(self) -> str:
        return (f"GapPartition(n={self.step_count}, M={self.current_max:.6g}, "
                f"m={self.current_min:.6g}, positional={self.positional})")


def new_partition(positional: bool = False, record_trajectory: bool = True,
                  thresholds: Sequence[float] = (),
                  windows: Sequence[tuple] = ()) -> GapPartition:
    """A single gap of length 1 at step 0, with optional trackers."""
    p = GapPartition(positional=positional, record_trajectory=record_trajectory)
    for t in thresholds:
        p.register_threshold(t)
    for w in windows:
        p.register_window(*w)
    return p


def split_max(p: GapPartition, u: float) -> GapPartition:
    """Split the maximal gap at relative position u (in place; returns p)."""
    u = float(u)
    if not (0.0 < u < 1.0):
        raise InvalidDrawError(f"draw must lie in (0,1), got {u!r}")
    p._advance(1, None, np.array([u]))
    return p


def split_sequence(p: GapPartition, us: Sequence[float]) -> GapPartition:
    us = np.ascontiguousarray(us, dtype=float)
    if us.size and not (np.all(us > 0.0) and np.all(us < 1.0)):
        raise InvalidDrawError("all draws must lie in (0,1)")
    p._advance(int(us.size), None, us)
    return p


def evolve(p: GapPartition, n: int, rng: RandomStream) -> GapPartition:
    """Apply n splits driven by consecutive uniforms from rng."""
    if n < 0:
        raise RegimeError(f"n must be >= 0, got {n}")
    before = p.draws
    p._advance(int(n), rng.generator, None)
    rng.advance_counter(p.draws - before)
    return p


def evolve_until(p: GapPartition, t: float, rng: RandomStream, chunk: int = 0) -> GapPartition:
    """Split until the maximal gap is <= t."""
    if not t > 0:
        from .errors import InvalidThresholdError
        raise InvalidThresholdError(f"threshold must be > 0, got {t}")
    chunk = chunk or int(min(4.0 / t + 64, 1 << 26))
    while p.current_max > t:
        before = p.draws
        p._advance(chunk, rng.generator, None, stop_below=t)
        rng.advance_counter(p.draws - before)
    return p


@dataclass(frozen=True)
class Watch:
    """What :func:`run` retains besides M_n and m_n."""
    trajectory: bool = True
    final_gaps: bool = False
    positional: bool = False
    thresholds: tuple = ()
    windows: tuple = ()     # (s, t, weight_name) triples


@dataclass(frozen=True)
class PathObservables:
    n_final: int
    max_final: float
    min_final: float
    max_trajectory: Optional[np.ndarray] = None
    final_gaps: Optional[np.ndarray] = None
    final_lefts: Optional[np.ndarray] = None   # sorted left endpoints
    threshold_times: dict = field(default_factory=dict)
    registered_statistics: dict = field(default_factory=dict)  # (weight,s,t) -> (count,sum)
    reciprocal_sum: float = float("nan")
    draws: int = 0
    seed: Optional[int] = None
    stream_index: Optional[int] = None

    def __post_init__(self):
        for name in ("max_trajectory", "final_gaps", "final_lefts"):
            arr = getattr(self, name)
            if arr is not None:
                arr.flags.writeable = False


def observe(p: GapPartition, watch: Watch = Watch(), rng: Optional[RandomStream] = None
            ) -> PathObservables:
    """Freeze the current state of p into an immutable record."""
    gaps = p.gaps() if (watch.final_gaps or watch.positional) else None
    lefts = np.sort(p.lefts()) if p.positional else None
    return PathObservables(
        n_final=p.step_count,
        max_final=p.current_max,
        min_final=p.current_min,
        max_trajectory=p.trajectory() if p.record_trajectory else None,
        final_gaps=gaps,
        final_lefts=lefts,
        threshold_times={t: n for t, n in p.threshold_counters},
        registered_statistics={(nm, s, t): (c, v) for (s, t), nm, c, v in p.small_gap_counters},
        reciprocal_sum=p.reciprocal_sum,
        draws=p.draws,
        seed=rng.seed if rng is not None else None,
        stream_index=rng.stream_index if rng is not None else None,
    )


def run(n: int, rng=None, watch: Watch = Watch()) -> PathObservables:
    """Run one path of n splits and return its observables."""
    if n < 0:
        raise RegimeError(f"n must be >= 0, got {n}")
    rng = as_stream(rng)
    p = GapPartition(positional=watch.positional, record_trajectory=watch.trajectory,
                     capacity=n + 2)
    for t in watch.thresholds:
        p.register_threshold(t)
    for w in watch.windows:
        p.register_window(*w)
    evolve(p, n, rng)
    return observe(p, watch, rng)


def edf_gaps(p, y: float) -> float:
    """G_n(y) = (n+1)^{-1} #{i : (n+1) L_{n,i} <= y}."""
    if isinstance(p, GapPartition):
        gaps = p.gaps()
    else:
        if p.final_gaps is None:
            raise UnsupportedObservableError("final gaps were not retained")
        gaps = p.final_gaps
    k = gaps.shape[0]
    return float(np.searchsorted(gaps * k, y, side="right")) / k


def edf_gaps_sup_error(gaps: np.ndarray, y_max: float = 2.0) -> float:
    """sup_{0<=y<=y_max} |G_n(y) - y/2| evaluated at the jump points."""
    k = gaps.shape[0]
    z = np.sort(gaps) * k
    z = z[z <= y_max]
    i = np.arange(1, z.size + 1)
    ref = z / 2.0
    err = max(np.max(np.abs(i / k - ref), initial=0.0),
              np.max(np.abs((i - 1) / k - ref), initial=0.0))
    # beyond the last jump inside [0, y_max]
    tail = abs(z.size / k - min(y_max, 2.0) / 2.0)
    return float(max(err, tail))


def endpoints(obs) -> np.ndarray:
    """The n interior split points X_{n,1} < ... < X_{n,n}."""
    if isinstance(obs, GapPartition):
        lefts = np.sort(obs.lefts())
    else:
        if obs.final_lefts is None:
            raise UnsupportedObservableError("gap positions were not retained; "
                                             "run with Watch(positional=True)")
        lefts = obs.final_lefts
    return lefts[1:]


def endpoints_from_gaps(obs) -> np.ndarray:
    """Split points rebuilt as prefix sums of the gaps ordered by position."""
    if isinstance(obs, GapPartition):
        lefts = obs.lefts()
        lengths = obs.heap.copy()
    else:
        raise UnsupportedObservableError("needs a live positional partition")
    order = np.argsort(lefts)
    return np.cumsum(lengths[order])[:-1]


def edf_endpoints(obs, x: float) -> float:
    """E_n(x) = n^{-1} #{i : X_{n,i} <= x}."""
    pts = endpoints(obs)
    if pts.size == 0:
        raise RegimeError("no split points at n = 0")
    return float(np.searchsorted(pts, x, side="right")) / pts.size


def edf_endpoints_sup_error(obs) -> float:
    """sup_{x in [0,1]} |E_n(x) - x|."""
    pts = endpoints(obs)
    n = pts.size
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - pts)), np.max(np.abs((i - 1) / n - pts))))


def dirichlet_run(n: int, rng=None) -> PathObservables:
    """Length-biased comparator: each step splits a gap chosen with probability
    proportional to its length, at a uniform point (equivalently, drops a
    uniform point into [0,1]). Returns M_n^D and m_n^D."""
    mx, mn = dirichlet_batch(n, 1, rng)
    return PathObservables(n_final=int(n), max_final=float(mx[0]), min_final=float(mn[0]))


def dirichlet_batch(n: int, paths: int, rng=None) -> tuple[np.ndarray, np.ndarray]:
    if n < 0:
        raise RegimeError(f"n must be >= 0, got {n}")
    rng = as_stream(rng)
    out_max = np.empty(paths)
    out_min = np.empty(paths)
    cnt = np.zeros(1, dtype=np.int64)
    K.batch_dirichlet(rng.generator, int(n), int(paths), out_max, out_min, cnt)
    rng.advance_counter(int(cnt[0]))
    return out_max, out_min


def extremes_batch(n: int, paths: int, rng=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(M_n, m_n, sum_{j<n} 1/M_j) for ``paths`` consecutive paths of one stream."""
    if n < 0:
        raise RegimeError(f"n must be >= 0, got {n}")
    rng = as_stream(rng)
    out_max = np.empty(paths)
    out_min = np.empty(paths)
    out_recip = np.empty(paths)
    cnt = np.zeros(1, dtype=np.int64)
    K.batch_extremes(rng.generator, int(n), int(paths), out_max, out_min, out_recip, cnt)
    rng.advance_counter(int(cnt[0]))
    return out_max, out_min, out_recip
