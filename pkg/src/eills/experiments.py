"""Replicated simulation benchmarks comparing EILLS with least-squares baselines.

Replication ``r`` is simulated with seed ``base_seed + r``. Replications may run
in worker processes (capped by ``EILLS_THREADS``); results are always
aggregated in replication order so reports do not depend on scheduling.
"""

from __future__ import annotations

import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import compute_stats
from .exceptions import ConfigurationError
from .scm import simulate_benchmark
from .solver import SearchConfig, l0_exhaustive, pooled_least_squares

ESTIMATORS = ("eills", "pooled_ls", "ls_on_S*", "ls_on_Gc")
_ALIASES = {"ls_on_Sstar": "ls_on_S*", "ls_on_S_star": "ls_on_S*"}


def resolve_estimators(names):
    out = []
    for name in names:
        name = _ALIASES.get(name.strip(), name.strip())
        if name not in ESTIMATORS:
            raise ConfigurationError(f"unknown estimator {name!r}; expected a subset of {ESTIMATORS}")
        out.append(name)
    if not out:
        raise ConfigurationError("no estimators requested")
    return out


def thread_count():
    raw = os.environ.get("EILLS_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"EILLS_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class ReplicationResult:
    estimator: str
    n: int
    rep: int
    sq_error: float
    hits_S: int
    hits_G: int


def run_replication(benchmark, params, n, seed, estimators, gamma=20.0, lam=0.0, weights="equal", rep=0):
    """Simulate one dataset and score every requested estimator on it."""
    ds, truth = simulate_benchmark(benchmark, params, n, seed, weights=weights)
    stats = compute_stats(ds)
    w = ds.weights
    S_star = set(truth.S_star)
    G = set(truth.G or ())
    out = []
    for name in estimators:
        if name == "eills":
            beta = l0_exhaustive(stats, w, SearchConfig(gamma=gamma, lam=lam)).beta
        elif name == "pooled_ls":
            beta = pooled_least_squares(stats, w)
        elif name == "ls_on_S*":
            beta = pooled_least_squares(stats, w, sorted(S_star))
        else:
            beta = pooled_least_squares(stats, w, [j for j in range(ds.p) if j not in G])
        sel = set(np.flatnonzero(beta).tolist())
        out.append(
            ReplicationResult(
                estimator=name,
                n=n,
                rep=rep,
                sq_error=float(np.sum((beta - truth.beta_star) ** 2)),
                hits_S=len(sel & S_star),
                hits_G=len(sel & G),
            )
        )
    return out


def _task(args):
    return run_replication(*args[:-1], rep=args[-1])


@dataclass(frozen=True)
class BenchRow:
    estimator: str
    n: int
    reps: int
    mean_sq_error: float
    se_sq_error: float
    mean_hits_S: float
    se_hits_S: float
    mean_hits_G: float
    se_hits_G: float

    FIELDS = (
        "estimator", "n", "reps", "mean_sq_error", "se_sq_error",
        "mean_hits_S", "se_hits_S", "mean_hits_G", "se_hits_G",
    )

    def values(self):
        return [getattr(self, f) for f in self.FIELDS]


def _mean_se(values):
    a = np.asarray(values, dtype=float)
    se = float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0
    return float(a.mean()), se


def aggregate(results, estimators, n_grid):
    rows = []
    for name in estimators:
        for n in n_grid:
            sub = [r for r in results if r.estimator == name and r.n == n]
            sub.sort(key=lambda r: r.rep)
            err = _mean_se([r.sq_error for r in sub])
            hs = _mean_se([r.hits_S for r in sub])
            hg = _mean_se([r.hits_G for r in sub])
            rows.append(BenchRow(name, n, len(sub), err[0], err[1], hs[0], hs[1], hg[0], hg[1]))
    return rows


def run_bench(
    benchmark="fig2",
    params=(),
    n_grid=(200, 500, 1000),
    reps=100,
    base_seed=0,
    estimators=ESTIMATORS,
    gamma=20.0,
    lam=0.0,
    weights="equal",
    workers=None,
    progress=False,
):
    """Run ``reps`` replications per sample size; returns ``(rows, raw_results)``."""
    if reps < 1:
        raise ConfigurationError("reps must be at least 1")
    if not n_grid:
        raise ConfigurationError("n grid is empty")
    estimators = resolve_estimators(estimators)
    tasks = [
        (benchmark, list(params), int(n), base_seed + r, estimators, gamma, lam, weights, r)
        for n in n_grid
        for r in range(reps)
    ]
    workers = thread_count() if workers is None else workers
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
            for i, chunk in enumerate(chunks):
                results.extend(chunk)
                if progress and (i + 1) % reps == 0:
                    print(f"[bench] finished n={tasks[i][2]}", file=sys.stderr)
    else:
        for i, t in enumerate(tasks):
            results.extend(_task(t))
            if progress and (i + 1) % reps == 0:
                print(f"[bench] finished n={t[2]}", file=sys.stderr)
    return aggregate(results, estimators, [int(n) for n in n_grid]), results
