"""Command-line front end.

Exit codes: 0 success, 1 failure (failed verification or resource error),
2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import closed_forms as cf
from .core import Watch, run
from .embeddings import (brw_extremes, cmj_population, parking_count, threshold_batch,
                         threshold_times)
from .errors import DegeneratePathError, KakutaniError, ResourceError
from .harness import default_threads, run_figure1, write_csv
from .rng import DEFAULT_SEED, RandomStream
from .verify import GROUPS, run_verify


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {v}")
    return v


def _pos_int(text: str) -> int:
    v = _nonneg_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected an integer >= 1")
    return v


def _seed(text: str) -> int:
    v = _nonneg_int(text)
    if v >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                        help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=_pos_int, default=None,
                        help="worker threads (default: $KAKUTANI_THREADS or 1)")

    p = argparse.ArgumentParser(prog="kakutani", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one path")
    s.add_argument("--n", type=_nonneg_int, required=True)
    s.add_argument("--thresholds", type=_float_list, default=[])
    s.add_argument("--stream", type=_nonneg_int, default=0)
    s.add_argument("--format", choices=["text", "json"], default="text")

    s = sub.add_parser("thresholds", parents=[common], help="threshold times N_t")
    s.add_argument("--t", type=_float_list, required=True)
    s.add_argument("--samples", type=_pos_int, default=1,
                   help="1 prints one path; more prints sample mean/variance vs mu, v")
    s.add_argument("--format", choices=["text", "json"], default="text")

    s = sub.add_parser("figure1", parents=[common], help="KS-distance experiments")
    s.add_argument("--profile", choices=["paper", "ci"], default="ci")
    s.add_argument("--samples", type=_pos_int, default=None)
    s.add_argument("--reps", type=_pos_int, default=None)
    s.add_argument("--out", default=None, help="output directory (default: no files)")
    s.add_argument("--format", choices=["csv", "json", "tsv", "all"], default="all")

    s = sub.add_parser("verify", parents=[common], help="run the property suite")
    s.add_argument("--groups", default=None,
                   help=f"comma-separated subset of {','.join(GROUPS)}")
    s.add_argument("--quick", action="store_true", help="reduced budgets")
    s.add_argument("--strict", action="store_true",
                   help="let the expected-discrepancy group affect the exit code")

    s = sub.add_parser("moments", parents=[common], help="tables of mu(t), v(t), w(t)")
    s.add_argument("--t", type=_float_list,
                   default=[0.05, 0.1, 0.25, 0.5, 0.6, 0.75, 0.9, 1.0, 2.0])
    s.add_argument("--format", choices=["text", "json"], default="text")

    s = sub.add_parser("embeddings", parents=[common], help="CMJ, parking and BRW samples")
    s.add_argument("--tau", type=float, default=math.log(2.0))
    s.add_argument("--x", type=float, default=2.0)
    s.add_argument("--n", type=_pos_int, default=400)
    s.add_argument("--samples", type=_pos_int, default=1)
    s.add_argument("--format", choices=["text", "json"], default="text")
    return p


def _emit(obj: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        for k, v in obj.items():
            print(f"{k} = {v}")


def cmd_simulate(a) -> int:
    obs = run(a.n, RandomStream(a.seed, a.stream),
              Watch(trajectory=False, thresholds=tuple(a.thresholds)))
    out = {"n": obs.n_final, "M_n": obs.max_final, "m_n": obs.min_final}
    for t in a.thresholds:
        out[f"N_t[{t:g}]"] = obs.threshold_times[float(t)]
    _emit(out, a.format)
    return 0


def cmd_thresholds(a) -> int:
    if a.samples == 1:
        res = threshold_times(a.t, RandomStream(a.seed, 0))
        _emit({f"N_t[{t:g}]": int(n) for t, n in zip(res.thresholds, res.times)}, a.format)
        return 0
    times = threshold_batch(a.t, a.samples, RandomStream(a.seed, 0))
    out = {}
    for j, t in enumerate(a.t):
        col = times[:, j].astype(float)
        out[f"t={t:g}"] = {"mean": col.mean(), "mu": cf.mu(t),
                           "var": col.var(ddof=1), "v": cf.v(t)}
    _emit(out, a.format)
    return 0


def cmd_figure1(a) -> int:
    res = run_figure1(a.profile, a.seed, a.threads, samples=a.samples, reps=a.reps)
    for panel, r in res.items():
        cells = ", ".join(f"{x.x:.3f}:{x.mean_log_ks:.3f}+-{x.spread:.2f}" for x in r.records)
        print(f"{panel} ({r.statistic}): {cells}; slope {r.fit.slope:.3f}, "
              f"intercept {r.fit.intercept:.3f}, wall {r.metadata['wall_time_s']:.1f}s")
    if a.out:
        os.makedirs(a.out, exist_ok=True)
        if a.format in ("csv", "all"):
            with open(os.path.join(a.out, "figure1.csv"), "w", newline="") as fh:
                write_csv([res["left"], res["right"]], fh)
        if a.format in ("json", "all"):
            for panel, r in res.items():
                with open(os.path.join(a.out, f"figure1_{panel}.json"), "w") as fh:
                    fh.write(r.to_json())
        if a.format in ("tsv", "all"):
            for panel, r in res.items():
                with open(os.path.join(a.out, f"figure1_{panel}.tsv"), "w") as fh:
                    fh.write(r.tsv())
        print(f"wrote results to {a.out}")
    return 0


def cmd_verify(a) -> int:
    groups = None
    if a.groups:
        groups = [g.strip() for g in a.groups.split(",") if g.strip()]
        unknown = [g for g in groups if g not in GROUPS]
        if unknown:
            print(f"unknown group(s): {unknown}", file=sys.stderr)
            return 2
    ok = run_verify(groups, a.seed, a.quick, a.strict)
    print("all groups passed" if ok else "verification FAILED")
    return 0 if ok else 1


def cmd_moments(a) -> int:
    rows = []
    for t in a.t:
        if t <= 0:
            print(f"t must be > 0, got {t}", file=sys.stderr)
            return 2
        rows.append({"t": t, "mu": cf.mu(t), "v": cf.v(t), "w": cf.w(t)})
    if a.format == "json":
        print(json.dumps({"constants": {"sigma2": cf.SIGMA2, "s0": cf.S0, "gamma": cf.GAMMA},
                          "table": rows}, indent=2))
    else:
        print(f"sigma2 = {cf.SIGMA2!r}  s0 = {cf.S0!r}  gamma = {cf.GAMMA!r}")
        print(f"{'t':>10} {'mu(t)':>14} {'v(t)':>14} {'w(t)':>14}")
        for r in rows:
            print(f"{r['t']:>10.6g} {r['mu']:>14.8f} {r['v']:>14.8f} {r['w']:>14.8f}")
    return 0


def cmd_embeddings(a) -> int:
    if a.tau < 0 or a.x <= 0:
        print("need tau >= 0 and x > 0", file=sys.stderr)
        return 2
    out = {}
    if a.samples == 1:
        out["T_tau"] = cmj_population(a.tau, RandomStream(a.seed, 0))
        out["P_0x"] = parking_count(a.x, RandomStream(a.seed, 1))
        left, right = brw_extremes(a.n, RandomStream(a.seed, 2))
        out["brw_leftmost"] = left
        out["brw_rightmost"] = right
    else:
        taus = threshold_batch([math.exp(-a.tau)], a.samples, RandomStream(a.seed, 0))[:, 0]
        parks = threshold_batch([1.0 / a.x], a.samples, RandomStream(a.seed, 1))[:, 0]
        out["T_tau_mean"] = float(taus.mean())
        out["P_0x_mean"] = float(parks.mean())
        out["reference_mean_T"] = cf.mu(math.exp(-a.tau))
        out["reference_mean_P"] = cf.mu(1.0 / a.x)
    _emit(out, a.format)
    return 0


COMMANDS = {"simulate": cmd_simulate, "thresholds": cmd_thresholds, "figure1": cmd_figure1,
            "verify": cmd_verify, "moments": cmd_moments, "embeddings": cmd_embeddings}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if a.threads is None:
            a.threads = default_threads()
        return COMMANDS[a.command](a)
    except (ResourceError, DegeneratePathError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KakutaniError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
