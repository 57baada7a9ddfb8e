"""Small-gap statistics and the conditional statistics built from them.

For a window (s, t] and a weight g on [0, 1],

    K^g_n(s, t] = sum_i g(L_{n,i} / t) 1{s < L_{n,i} <= t}.

Gaps below the current maximum are never split again, so these sums only need
to look at the gap that is removed and the two children at each split. The
engine keeps them incrementally; the ``*_full_scan`` functions recompute the
same numbers from the final gap list and exist only as cross-checks.

Conditional statistics at level t (t < 1/(n+1)):

    R = E(N_t | F_n) - E N_t   = sum_{L <= t} (1 - 2L/t)
    S = v(t) - Var(N_t | F_n)  = (s0/t) sum_{L <= t} L - sum_i w(t / L_i)
    W = -sum_{t < L <= 2t} w(t / L)

The second form of S follows from Var(N_t | F_n) = sum_i v(t / L_i) and
v(x) = s0/x + w(x) on (0, 1). Writing (s0/t) sum L = (s0/2)(K_t - R) gives the
pathwise identity S = (s0/2) K_t - (s0/2) R + W, see :func:`s_identity_residuals`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import _kernels as K
from .closed_forms import S0, mu, v, w
from .core import WEIGHT_CODES, GapPartition, PathObservables
from .errors import InvalidRegistrationError, RegimeError
from .rng import as_stream

WEIGHTS: dict[str, Callable[[float], float]] = {
    "one": lambda x: 1.0,
    "r_weight": lambda x: 1.0 - 2.0 * x,
    "half": lambda x: 1.0 if x <= 0.5 else 0.0,
    "identity": lambda x: x,
    "w_slab": lambda x: -w(0.5 / x),  # x = L/(2t) on the window (t, 2t]
}


@dataclass(frozen=True)
class SmallGapRegistration:
    s: float
    t: float
    weight: str = "one"

    def __post_init__(self):
        if not (0 <= self.s < self.t):
            raise InvalidRegistrationError(f"need 0 <= s < t, got ({self.s}, {self.t}]")
        if self.weight not in WEIGHT_CODES:
            raise InvalidRegistrationError(f"unknown weight {self.weight!r}")

    def as_tuple(self) -> tuple:
        return (self.s, self.t, self.weight)

    def in_regime(self, n: int) -> bool:
        """2 n t <= 1, where captured gaps are i.i.d.-marked given the trajectory."""
        return 2.0 * n * self.t <= 1.0


def _window_lookup(path, s, t, weight):
    if isinstance(path, GapPartition):
        return path.window(s, t, weight)
    key = (weight, float(s), float(t))
    if key not in path.registered_statistics:
        raise InvalidRegistrationError(
            f"window ({s}, {t}] with weight {weight!r} was not registered at step 0")
    return path.registered_statistics[key]


def small_gap_statistic(path, weight: str, s: float, t: float) -> float:
    """K^g_n(s, t] from the incremental counters of a registered window."""
    if not (0 <= s < t <= 1):
        raise InvalidRegistrationError(f"need 0 <= s < t <= 1, got ({s}, {t}]")
    count, total = _window_lookup(path, s, t, weight)
    return float(count) if weight == "one" else float(total)


def small_gap_count(path, s: float, t: float) -> int:
    return int(_window_lookup(path, s, t, "one")[0])


def small_gap_full_scan(gaps: np.ndarray, weight: str, s: float, t: float) -> float:
    g = WEIGHTS[weight]
    sel = gaps[(gaps > s) & (gaps <= t)]
    return math.fsum(g(x / t) for x in sel)


@dataclass(frozen=True)
class ConditionalStats:
    n: int
    t: float
    R: float
    S: float
    W: float
    K_t: int
    K_2t: int
    valid: bool          # t < 1/(n+1): R and S are the conditional quantities
    s_bounds_apply: bool  # t < 1/(4(n+1)): the |S| <= s0 K_2t regime

    @property
    def V(self) -> float:
        """Var(N_t | F_n) = v(t) - S."""
        return v(self.t) - self.S


def condition_windows(t: float) -> tuple:
    """The windows :func:`conditional_stats` reads."""
    return ((0.0, t, "one"), (0.0, t, "r_weight"), (0.0, t, "identity"),
            (t, 2.0 * t, "one"), (t, 2.0 * t, "w_slab"))


def _assemble(n, t, k_t, r, sum_id, k_2t_slab, w_slab) -> ConditionalStats:
    s_val = S0 * sum_id + w_slab
    return ConditionalStats(
        n=int(n), t=float(t), R=float(r), S=float(s_val), W=float(w_slab),
        K_t=int(k_t), K_2t=int(k_t + k_2t_slab),
        valid=bool(t < 1.0 / (n + 1)), s_bounds_apply=bool(t < 1.0 / (4 * (n + 1))))


def conditional_stats(path, t: float) -> ConditionalStats:
    """R, S, W, K_t, K_2t from registered counters (see :func:`condition_windows`)."""
    n = path.step_count if isinstance(path, GapPartition) else path.n_final
    k_t, _ = _window_lookup(path, 0.0, t, "one")
    _, r = _window_lookup(path, 0.0, t, "r_weight")
    _, sid = _window_lookup(path, 0.0, t, "identity")
    k_slab, _ = _window_lookup(path, t, 2.0 * t, "one")
    _, wsl = _window_lookup(path, t, 2.0 * t, "w_slab")
    return _assemble(n, t, k_t, r, sid, k_slab, wsl)


def conditional_stats_full_scan(gaps: np.ndarray, n: int, t: float) -> ConditionalStats:
    """The same statistics straight from the definitions, using mu and v.

    R = sum_i mu(t/L_i) + n - mu(t) and S = v(t) - sum_i v(t/L_i).
    """
    r = math.fsum(mu(t / x) for x in gaps) + n - mu(t)
    s_val = v(t) - math.fsum(v(t / x) for x in gaps)
    slab = gaps[(gaps > t) & (gaps <= 2 * t)]
    w_val = -math.fsum(w(t / x) for x in slab)
    k_t = int(np.count_nonzero(gaps <= t))
    k_2t = int(np.count_nonzero(gaps <= 2 * t))
    return ConditionalStats(n=int(n), t=float(t), R=r, S=s_val, W=w_val, K_t=k_t, K_2t=k_2t,
                            valid=bool(t < 1.0 / (n + 1)),
                            s_bounds_apply=bool(t < 1.0 / (4 * (n + 1))))


def s_identity_residuals(cs: ConditionalStats) -> tuple[float, float]:
    """Residuals of two candidate identities for S.

    Returns (S - [(s0/2)K_t + R/2 + W], S - [(s0/2)K_t - (s0/2)R + W]). The second
    is an exact algebraic consequence of the definitions; the first is the form
    in which the identity is usually quoted.
    """
    quoted = 0.5 * S0 * cs.K_t + 0.5 * cs.R + cs.W
    derived = 0.5 * S0 * cs.K_t - 0.5 * S0 * cs.R + cs.W
    return cs.S - quoted, cs.S - derived


# ------------------------------------------------------------ batch samplers

@dataclass(frozen=True)
class ConditionalBatch:
    n: int
    t: float
    R: np.ndarray
    S: np.ndarray
    W: np.ndarray
    K_t: np.ndarray
    K_2t: np.ndarray
    m_n: np.ndarray


def conditional_batch(n: int, t: float, paths: int, rng=None) -> ConditionalBatch:
    """Conditional statistics at (n, t) for ``paths`` consecutive paths of one stream."""
    rng = as_stream(rng)
    if 4.0 * n * t < 1.0:
        out = np.empty((paths, 5))
        mn = np.empty(paths)
        c = np.zeros(1, dtype=np.int64)
        K.batch_conditional(rng.generator, int(n), int(paths), float(t), out, mn, c)
        rng.advance_counter(int(c[0]))
        k_t = out[:, 0].astype(np.int64)
        return ConditionalBatch(n=int(n), t=float(t), R=out[:, 1], S=S0 * out[:, 2] + out[:, 4],
                                W=out[:, 4], K_t=k_t, K_2t=k_t + out[:, 3].astype(np.int64),
                                m_n=mn)
    return _conditional_batch_general(n, t, paths, rng)


def _conditional_batch_general(n: int, t: float, paths: int, rng) -> ConditionalBatch:
    regs = condition_windows(t)
    reg_s = np.array([r[0] for r in regs])
    reg_t = np.array([r[1] for r in regs])
    reg_c = np.array([WEIGHT_CODES[r[2]] for r in regs], dtype=np.int64)
    cnt = np.empty((paths, len(regs)), dtype=np.int64)
    sm = np.empty((paths, len(regs)))
    mx = np.empty(paths)
    mn = np.empty(paths)
    c = np.zeros(1, dtype=np.int64)
    K.batch_registered(rng.generator, int(n), int(paths), reg_s, reg_t, reg_c,
                       cnt, sm, mx, mn, c)
    rng.advance_counter(int(c[0]))
    k_t = cnt[:, 0]
    return ConditionalBatch(n=int(n), t=float(t), R=sm[:, 1], S=S0 * sm[:, 2] + sm[:, 4],
                            W=sm[:, 4], K_t=k_t, K_2t=k_t + cnt[:, 3], m_n=mn)


def window_count_batch(n: int, s: float, t: float, paths: int, rng=None) -> np.ndarray:
    """K_n(s, t] for consecutive paths of one stream."""
    rng = as_stream(rng)
    cnt = np.empty((paths, 1), dtype=np.int64)
    sm = np.empty((paths, 1))
    mx = np.empty(paths)
    mn = np.empty(paths)
    c = np.zeros(1, dtype=np.int64)
    K.batch_registered(rng.generator, int(n), int(paths), np.array([float(s)]),
                       np.array([float(t)]), np.array([K.W_ONE], dtype=np.int64),
                       cnt, sm, mx, mn, c)
    rng.advance_counter(int(c[0]))
    return cnt[:, 0]


# ----------------------------------------------------------- theta oracle

def _theta_regime(n: int, s: float, t: float) -> None:
    if not (0 <= s < t):
        raise RegimeError(f"need 0 <= s < t, got ({s}, {t}]")
    if 2.0 * n * t > 1.0:
        raise RegimeError(f"theta oracle needs 2 n t <= 1, got 2*{n}*{t} = {2 * n * t:g}")


def theta_oracle_K(max_trajectory: np.ndarray, s: float, t: float, rng=None,
                   marks: bool = False):
    """K_n(s,t] as sum_{i<n} Bernoulli(2(t-s)/M_i), given M_0..M_{n-1}.

    With ``marks=True`` also returns K i.i.d. Unif(s/t, 1) marks, the relative
    sizes L/t of the captured gaps in the resampled picture.
    """
    traj = np.ascontiguousarray(max_trajectory, dtype=float)
    n = traj.shape[0]
    _theta_regime(n, s, t)
    rng = as_stream(rng)
    out = np.empty(1, dtype=np.int64)
    c = np.zeros(1, dtype=np.int64)
    K.theta_from_traj(rng.generator, traj, float(s), float(t), 1, out, c)
    rng.advance_counter(int(c[0]))
    k = int(out[0])
    if not marks:
        return k
    lo = s / t
    u = rng.uniforms(k)
    return k, lo + (1.0 - lo) * u


def theta_oracle_batch(n: int, s: float, t: float, paths: int, rng=None
                       ) -> tuple[np.ndarray, np.ndarray]:
    """(direct K_n(s,t], oracle K) per path; each oracle draw uses that path's trajectory."""
    _theta_regime(n, s, t)
    rng = as_stream(rng)
    direct = np.empty(paths, dtype=np.int64)
    oracle = np.empty(paths, dtype=np.int64)
    c = np.zeros(1, dtype=np.int64)
    K.batch_trajectory_theta(rng.generator, int(n), int(paths), float(s), float(t),
                             direct, oracle, c)
    rng.advance_counter(int(c[0]))
    return direct, oracle


# --------------------------------------------------------- reciprocal sums

def reciprocal_sum_moment(path, n: int, k: int) -> float:
    """(4^k / n^(2k)) (sum_{j<n} 1/M_j)^k for this path."""
    if k < 1:
        raise RegimeError(f"k must be >= 1, got {k}")
    if isinstance(path, PathObservables):
        if path.max_trajectory is not None:
            if path.n_final < n:
                raise RegimeError(f"path has {path.n_final} steps, need {n}")
            total = math.fsum(1.0 / path.max_trajectory[:n])
        elif path.n_final == n:
            total = path.reciprocal_sum
        else:
            raise RegimeError("trajectory not retained and n differs from n_final")
    else:
        traj = np.asarray(path, dtype=float)
        total = math.fsum(1.0 / traj[:n])
    return (4.0 * total / (n * n)) ** k


# ------------------------------------------------------ Poisson comparison

def poisson_support(mean: float) -> int:
    """Truncation point mean + 12 sqrt(mean) (plus slack for tiny means)."""
    return int(math.ceil(mean + 12.0 * math.sqrt(mean) + 12))


def tv_to_poisson(samples: np.ndarray, mean: float) -> float:
    """Total variation between an empirical pmf and Poisson(mean)."""
    samples = np.asarray(samples, dtype=np.int64)
    top = max(poisson_support(mean), int(samples.max(initial=0)))
    emp = np.bincount(samples, minlength=top + 1)[: top + 1] / samples.size
    ref = stats.poisson.pmf(np.arange(top + 1), mean)
    tail = stats.poisson.sf(top, mean)
    return 0.5 * (float(np.abs(emp - ref).sum()) + float(tail))


@dataclass(frozen=True)
class PoissonCheck:
    n: int
    t: float
    mean: float
    tv_estimate: float
    noise_floor: float     # 3/sqrt(samples)
    scale: float           # n^{3/2} t, the order of the proven bound


def poisson_tv_check(n: int, theta: float, samples: int, rng=None) -> PoissonCheck:
    """TV distance between the law of K_{n,t} (t = 2 theta / n^2) and Poisson(theta)."""
    t = 2.0 * theta / (n * n)
    if 2.0 * n * t > 1.0:
        raise RegimeError(f"need 2 n t <= 1, got {2 * n * t:g}")
    ks = window_count_batch(n, 0.0, t, samples, rng)
    mean = n * n * t / 2.0
    return PoissonCheck(n=n, t=t, mean=mean, tv_estimate=tv_to_poisson(ks, mean),
                        noise_floor=3.0 / math.sqrt(samples), scale=n**1.5 * t)


def min_gap_survival(n: int, x_grid, samples: int, rng=None) -> np.ndarray:
    """Empirical Pr(n^2 m_n / 2 > x) on x_grid."""
    if n < 1:
        raise RegimeError(f"need n >= 1, got {n}")
    from .core import extremes_batch
    _, mn, _ = extremes_batch(n, samples, rng)
    z = np.sort(n * n * mn / 2.0)
    x = np.asarray(x_grid, dtype=float)
    return 1.0 - np.searchsorted(z, x, side="right") / z.size
