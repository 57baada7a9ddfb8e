"""Declarative Monte Carlo experiments with KS estimation and log-log fits.

Each (size, replication) cell is an independent task with its own stream,
``stream_index = replication * len(sizes) + size_id``, so results do not depend
on how many threads run the cells or in which order they finish.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .closed_forms import SIGMA2
from .core import extremes_batch
from .embeddings import threshold_batch
from .errors import ConfigError
from .rng import DEFAULT_SEED, RandomStream

REFERENCES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "normal": lambda x: ndtr(x),
    "exponential": lambda x: -np.expm1(-np.maximum(x, 0.0)),
    "gumbel": lambda x: np.exp(-np.exp(-x)),
}


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise ConfigError("empty sample")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.size

    def ks(self, reference) -> float:
        return ks_distance(self, reference)


def ks_distance(sample, reference) -> float:
    """sup_x |F_emp(x) - F(x)| for a continuous reference F.

    At each order statistic both the left limit and the value of the
    empirical CDF are compared with F; repeated values are grouped so ties are
    handled exactly.
    """
    if not isinstance(sample, EmpiricalSample):
        sample = EmpiricalSample(sample)
    F = REFERENCES[reference] if isinstance(reference, str) else reference
    x = sample.values
    n = x.size
    uniq, first = np.unique(x, return_index=True)
    below = first / n                                   # F_emp just left of each value
    upto = np.append(first[1:], n) / n                  # F_emp at each value
    ref = np.asarray(F(uniq), dtype=float)
    return float(max(np.max(np.abs(upto - ref)), np.max(np.abs(below - ref))))


# ------------------------------------------------------------ statistics

@dataclass(frozen=True)
class Statistic:
    name: str
    source: str            # "extremes" | "thresholds" | "custom"
    reference: str
    x_of_size: Callable[[float], float]
    transform: Optional[Callable] = None   # (size, raw) -> standardized values


def _max_gap(n, raw):
    mx = raw[0]
    return np.sqrt(n**3 / SIGMA2) * (mx - 2.0 / n)


def _min_gap(n, raw):
    return n * n * raw[1] / 2.0


def _brw_gumbel(n, raw):
    return -np.log(raw[1]) - math.log(n * n / 2.0)


def _brw_clt(n, raw):
    return np.sqrt(4.0 * n / SIGMA2) * (-np.log(raw[0]) - math.log(n / 2.0))


def _threshold(t, raw):
    return np.sqrt(2.0 * t / SIGMA2) * (raw - 2.0 / t)


def _cmj(tau, raw):
    return math.sqrt(2.0 / SIGMA2) * math.exp(-tau / 2.0) * (raw - 2.0 * math.exp(tau))


STATISTICS: dict[str, Statistic] = {
    "max_gap_clt": Statistic("max_gap_clt", "extremes", "normal", math.log, _max_gap),
    "min_gap_exp": Statistic("min_gap_exp", "extremes", "exponential", math.log, _min_gap),
    "brw_gumbel": Statistic("brw_gumbel", "extremes", "gumbel", math.log, _brw_gumbel),
    "brw_clt": Statistic("brw_clt", "extremes", "normal", math.log, _brw_clt),
    "threshold_clt": Statistic("threshold_clt", "thresholds", "normal",
                               lambda t: math.log(1.0 / t), _threshold),
    "cmj_clt": Statistic("cmj_clt", "cmj", "normal", lambda tau: tau, _cmj),
    "custom": Statistic("custom", "custom", "normal", math.log, None),
}


@dataclass(frozen=True)
class ExperimentSpec:
    statistic: str
    sizes: tuple
    samples_per_estimate: int = 10_000
    replications: int = 1_000
    seed: int = DEFAULT_SEED
    thread_budget: int = 1
    reference: Optional[str] = None
    keep_raw: bool = False
    # custom statistic: sampler(size, samples, stream) -> values
    sampler: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(self.sizes))
        if self.statistic not in STATISTICS:
            raise ConfigError(f"unknown statistic {self.statistic!r}; "
                              f"choose from {sorted(STATISTICS)}")
        if self.samples_per_estimate < 100:
            raise ConfigError("samples_per_estimate must be >= 100")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.thread_budget < 1:
            raise ConfigError("thread_budget must be >= 1")
        if not self.sizes:
            raise ConfigError("sizes must be non-empty")
        if self.statistic == "custom" and self.sampler is None:
            raise ConfigError("custom statistic needs a sampler")
        ref = self.reference or STATISTICS[self.statistic].reference
        if ref not in REFERENCES:
            raise ConfigError(f"unknown reference {ref!r}")
        object.__setattr__(self, "reference", ref)

    @property
    def total_paths(self) -> int:
        return len(self.sizes) * self.samples_per_estimate * self.replications

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("sampler")
        d["sizes"] = list(self.sizes)
        return d


@dataclass(frozen=True)
class SizeRecord:
    size: float
    x: float
    mean_log_ks: float
    spread: float
    stderr: float
    raw: Optional[tuple] = None


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residuals: tuple


@dataclass(frozen=True)
class ExperimentResult:
    statistic: str
    records: tuple
    fit: Optional[FitResult]
    metadata: dict

    def to_json(self) -> str:
        d = {"statistic": self.statistic,
             "records": [asdict(r) | {"raw": list(r.raw) if r.raw is not None else None}
                         for r in self.records],
             "fit": asdict(self.fit) | {"residuals": list(self.fit.residuals)}
             if self.fit else None,
             "metadata": self.metadata}
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentResult":
        d = json.loads(text)
        recs = tuple(SizeRecord(**(r | {"raw": tuple(r["raw"]) if r["raw"] is not None
                                        else None})) for r in d["records"])
        fit = FitResult(d["fit"]["slope"], d["fit"]["intercept"],
                        tuple(d["fit"]["residuals"])) if d["fit"] else None
        return cls(d["statistic"], recs, fit, d["metadata"])

    def same_numbers(self, other: "ExperimentResult") -> bool:
        """Equality ignoring wall time."""
        strip = lambda m: {k: v for k, v in m.items() if k != "wall_time_s"}
        return (self.statistic == other.statistic and self.records == other.records
                and self.fit == other.fit and strip(self.metadata) == strip(other.metadata))

    def csv_rows(self) -> list[dict]:
        m = self.metadata
        return [{"statistic": self.statistic, "n": r.size, "log_n": r.x,
                 "mean_log_ks": r.mean_log_ks, "spread": r.spread,
                 "reps": m["replications"], "samples": m["samples_per_estimate"],
                 "seed": m["seed"]} for r in self.records]

    def tsv(self) -> str:
        return "".join(f"{r.x!r}\t{r.mean_log_ks!r}\n" for r in self.records)


CSV_COLUMNS = ["statistic", "n", "log_n", "mean_log_ks", "spread", "reps", "samples", "seed"]


def write_csv(results: Sequence[ExperimentResult], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for res in results:
        for row in res.csv_rows():
            w.writerow(row)


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


# --------------------------------------------------------------- fitting

def fit_loglog(points) -> tuple[float, float]:
    """Ordinary least squares y = slope * x + intercept."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ConfigError("need at least two points")
    x, y = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0:
        raise ConfigError("x values must not all coincide")
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


def summarize_ci(values) -> tuple[float, float, float]:
    """(mean, sample sd, sd / sqrt(count))."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ConfigError("need at least two values")
    sd = float(np.std(v, ddof=1))
    return float(np.mean(v)), sd, sd / math.sqrt(v.size)


# ------------------------------------------------------------- driving

def _raw_draw(source: str, size, samples: int, stream: RandomStream, spec: ExperimentSpec):
    if source == "extremes":
        mx, mn, _ = extremes_batch(int(size), samples, stream)
        return (mx, mn)
    if source == "thresholds":
        return threshold_batch([float(size)], samples, stream)[:, 0]
    if source == "cmj":
        return threshold_batch([math.exp(-float(size))], samples, stream)[:, 0]
    return spec.sampler(size, samples, stream)


def run_experiments(specs: Sequence[ExperimentSpec]) -> list[ExperimentResult]:
    """Run several specs; those sharing budgets, seed and simulation source reuse paths.

    Sharing never changes any number: a spec run alone draws the very same
    streams as it does inside a group.
    """
    specs = list(specs)
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(specs):
        src = STATISTICS[s.statistic].source
        key = (src, s.sizes, s.samples_per_estimate, s.replications, s.seed,
               i if src == "custom" else -1)
        groups.setdefault(key, []).append(i)
    out: list[Optional[ExperimentResult]] = [None] * len(specs)
    for idx in groups.values():
        for i, res in zip(idx, _run_group([specs[i] for i in idx])):
            out[i] = res
    return out


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    return run_experiments([spec])[0]


def _run_group(specs: list[ExperimentSpec]) -> list[ExperimentResult]:
    base = specs[0]
    stats = [STATISTICS[s.statistic] for s in specs]
    sizes = base.sizes
    n_sizes = len(sizes)
    reps = base.replications
    threads = max(s.thread_budget for s in specs)
    log_ks = np.empty((len(specs), n_sizes, reps))
    draws = np.zeros((n_sizes, reps), dtype=np.int64)

    def cell(job):
        size_id, rep = job
        stream = RandomStream(base.seed, rep * n_sizes + size_id)
        raw = _raw_draw(stats[0].source, sizes[size_id], base.samples_per_estimate,
                        stream, base)
        for j, (sp, st) in enumerate(zip(specs, stats)):
            vals = raw if st.transform is None else st.transform(sizes[size_id], raw)
            log_ks[j, size_id, rep] = math.log(ks_distance(EmpiricalSample(vals),
                                                           sp.reference))
        draws[size_id, rep] = stream.counter

    jobs = [(i, r) for r in range(reps) for i in range(n_sizes)]
    t0 = time.perf_counter()
    if threads == 1:
        for job in jobs:
            cell(job)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(cell, jobs))
    wall = time.perf_counter() - t0

    results = []
    for j, (sp, st) in enumerate(zip(specs, stats)):
        recs = []
        for i, size in enumerate(sizes):
            vals = log_ks[j, i]
            if reps >= 2:
                mean, sd, se = summarize_ci(vals)
            else:
                mean, sd, se = float(vals[0]), float("nan"), float("nan")
            recs.append(SizeRecord(size=float(size), x=float(st.x_of_size(size)),
                                   mean_log_ks=mean, spread=sd, stderr=se,
                                   raw=tuple(float(v) for v in vals) if sp.keep_raw else None))
        fit = None
        if n_sizes >= 2:
            pts = [(r.x, r.mean_log_ks) for r in recs]
            slope, icpt = fit_loglog(pts)
            fit = FitResult(slope, icpt, tuple(float(y - (slope * x + icpt)) for x, y in pts))
        meta = {"seed": sp.seed, "samples_per_estimate": sp.samples_per_estimate,
                "replications": sp.replications, "sizes": [float(s) for s in sizes],
                "reference": sp.reference, "total_paths": sp.total_paths,
                "draws": int(draws.sum()), "wall_time_s": wall,
                "shared_with": [s.statistic for s in specs if s is not sp]}
        results.append(ExperimentResult(sp.statistic, tuple(recs), fit, meta))
    return results


# ------------------------------------------------------------- figure 1

PROFILES = {"paper": (10_000, 1_000), "ci": (1_000, 100)}
FIGURE1_SIZES = (100, 200, 400)


def default_threads() -> int:
    env = os.environ.get("KAKUTANI_THREADS")
    if env:
        try:
            val = int(env)
        except ValueError as exc:
            raise ConfigError(f"KAKUTANI_THREADS must be an integer, got {env!r}") from exc
        if val < 1:
            raise ConfigError("KAKUTANI_THREADS must be >= 1")
        return val
    return 1


def figure1_specs(profile: str = "ci", seed: int = DEFAULT_SEED, threads: int = 1,
                  sizes=FIGURE1_SIZES, samples: Optional[int] = None,
                  reps: Optional[int] = None) -> dict[str, ExperimentSpec]:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    s, r = PROFILES[profile]
    s = samples or s
    r = reps or r
    return {"left": ExperimentSpec("max_gap_clt", tuple(sizes), s, r, seed, threads),
            "right": ExperimentSpec("min_gap_exp", tuple(sizes), s, r, seed, threads)}


def run_figure1(profile: str = "ci", seed: int = DEFAULT_SEED, threads: int = 1,
                **kw) -> dict[str, ExperimentResult]:
    """Both panels: KS of the max-gap CLT (left) and the min-gap exponential law (right).

    The two panels are computed from the same simulated paths.
    """
    specs = figure1_specs(profile, seed, threads, **kw)
    left, right = run_experiments([specs["left"], specs["right"]])
    return {"left": left, "right": right}
