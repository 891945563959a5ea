"""Exact minimization of the EILLS and l0-EILLS objectives.

For a fixed support ``S`` the objective is a quadratic in ``beta_S``::

    Q_S(b) = b' M(S) b - 2 r(S)' b + const(S)
    M(S) = sum_e w_e (G_SS + gamma G_SS G_SS)
    r(S) = sum_e w_e (c_S + gamma G_SS c_S)
    const(S) = sum_e w_e (yty + gamma |c_S|^2)

so its minimizer solves ``M(S) b = r(S)`` with minimum ``const(S) - r(S)' b``.
The global minimizer is found by enumerating every support. Supports are
visited by size, then lexicographically; supports of one size are solved in
vectorized batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations, islice
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError, SingularSupportError, SolverError
from .objective import ObjectiveValue, l0_objective

MAX_P = 30
SINGULAR_RTOL = 1e-10
TIE_RTOL = 1e-12
_BATCH = 4096
SINGULAR_POLICIES = ("reject", "min_norm")


@dataclass(frozen=True)
class SearchConfig:
    gamma: float = 0.0
    lam: float = 0.0
    max_support_size: Optional[int] = None
    include_empty: bool = True
    singular_policy: str = "reject"

    def __post_init__(self):
        if self.gamma < 0 or self.lam < 0:
            raise ConfigurationError("gamma and lambda must be nonnegative")
        if self.singular_policy not in SINGULAR_POLICIES:
            raise ConfigurationError(
                f"singular_policy must be one of {SINGULAR_POLICIES}, got {self.singular_policy!r}"
            )


@dataclass(frozen=True, eq=False)
class FitResult:
    """Minimizer found by the exhaustive search.

    ``support`` holds 0-based column indices of the nonzero coefficients.
    ``per_support_log`` lists ``(support, minimized objective)`` for every
    enumerated support when logging was requested.
    """

    beta: np.ndarray
    support: tuple
    objective: ObjectiveValue
    gamma: float
    lam: float = 0.0
    per_support_log: Optional[list] = field(default=None, repr=False)


def restricted_normal_system(stats, weights, support, gamma):
    """First-order system ``(M(S), r(S))`` of the objective restricted to ``S``."""
    idx = np.asarray(sorted(support), dtype=int)
    w = np.asarray(weights, dtype=float)
    A = stats.gram[:, idx[:, None], idx[None, :]]
    c = stats.xty[:, idx]
    M = np.tensordot(w, A + gamma * A @ A, axes=1)
    r = np.tensordot(w, c + gamma * np.einsum("eij,ej->ei", A, c), axes=1)
    return 0.5 * (M + M.T), r


def _solve_batch(M, r, policy, supports):
    """Solve a stack of symmetric systems; returns solutions, shape like ``r``."""
    evals = np.linalg.eigvalsh(M)
    top = np.maximum(np.abs(evals[:, -1]), np.finfo(float).tiny)
    ratio = evals[:, 0] / top
    bad = ratio < SINGULAR_RTOL
    if policy == "reject":
        if bad.any():
            i = int(np.argmax(bad))
            raise SingularSupportError(supports[i], float(ratio[i]))
        return np.linalg.solve(M, r[..., None])[..., 0]
    out = np.empty_like(r)
    good = ~bad
    if good.any():
        out[good] = np.linalg.solve(M[good], r[good][..., None])[..., 0]
    if bad.any():
        lam, V = np.linalg.eigh(M[bad])
        cut = SINGULAR_RTOL * np.max(np.abs(lam), axis=1, keepdims=True)
        inv = np.where(lam > cut, 1.0 / np.where(lam > cut, lam, 1.0), 0.0)
        out[bad] = np.einsum("mij,mj,mkj,mk->mi", V, inv, V, r[bad])
    return out


def minimize_on_support(stats, weights, support, gamma, singular_policy="reject"):
    """Minimize the EILLS objective over vectors supported on ``support``.

    Returns ``(beta, value)`` where ``beta`` is the full length-``p`` vector
    (zeros off the support) and ``value`` is the minimized objective.
    """
    if singular_policy not in SINGULAR_POLICIES:
        raise ConfigurationError(f"unknown singular_policy {singular_policy!r}")
    w = np.asarray(weights, dtype=float)
    S = tuple(sorted(support))
    beta = np.zeros(stats.p)
    const = float(w @ stats.yty)
    if not S:
        return beta, const
    M, r = restricted_normal_system(stats, w, S, gamma)
    b = _solve_batch(M[None], r[None], singular_policy, [S])[0]
    beta[list(S)] = b
    c = stats.xty[:, list(S)]
    const += gamma * float(w @ np.sum(c**2, axis=1))
    return beta, const - float(r @ b)


def _support_batches(p, max_size, include_empty):
    for k in range(0 if include_empty else 1, max_size + 1):
        it = combinations(range(p), k)
        while True:
            chunk = list(islice(it, _BATCH))
            if not chunk:
                break
            yield k, chunk


class _Best:
    """Running argmin honouring enumeration order within ``TIE_RTOL``.

    Ties are measured relative to ``max(|value|, scale)`` with ``scale`` the
    objective of the empty support: values are computed as ``const - r'b``, so
    their rounding error is of that order even when the minimum is near 0.
    """

    def __init__(self, scale):
        self.value = np.inf
        self.support = None
        self.coef = None
        self.scale = abs(scale)

    def _tol(self, v):
        return TIE_RTOL * max(abs(v), self.scale)

    def offer(self, values, supports, coefs):
        vmin = float(values.min())
        i = int(np.argmax(values <= vmin + self._tol(vmin)))
        v = float(values[i])
        if self.support is None or v < self.value - self._tol(self.value):
            self.value, self.support, self.coef = v, supports[i], coefs[i]


def _check_search(stats, config):
    p = stats.p
    k = p if config.max_support_size is None else config.max_support_size
    if not 0 <= k <= p:
        raise ConfigurationError(f"max_support_size must lie in [0, {p}], got {k}")
    if p > MAX_P and config.max_support_size is None:
        raise SolverError(
            f"exhaustive search over 2^{p} supports refused (cap p <= {MAX_P}); "
            "set max_support_size to bound the enumeration"
        )
    if k == 0 and not config.include_empty:
        raise ConfigurationError("nothing to enumerate: max_support_size=0 and include_empty=False")
    return k


def _search(stats, weights, gammas, lams, config, log=False):
    """Exhaustive search for every ``(gamma, lambda)`` pair in the grids.

    Moments are gathered once per batch of supports and reused for every grid
    point. Returns a nested list ``best[g][l]`` and, if requested, the log for
    the single-grid-point case.
    """
    w = np.asarray(weights, dtype=float)
    k_max = _check_search(stats, config)
    base = float(w @ stats.yty)
    best = [[_Best(base) for _ in lams] for _ in gammas]
    entries = [] if log else None
    for k, supports in _support_batches(stats.p, k_max, config.include_empty):
        m = len(supports)
        if k == 0:
            coef = np.zeros((1, 0))
            for g, _gamma in enumerate(gammas):
                for l, lam in enumerate(lams):
                    best[g][l].offer(np.array([base]), supports, coef)
            if log:
                entries.append(((), base))
            continue
        idx = np.array(supports, dtype=int)
        A = stats.gram[:, idx[:, :, None], idx[:, None, :]]
        c = stats.xty[:, idx]
        MA = np.tensordot(w, A, axes=1)
        MAA = np.tensordot(w, A @ A, axes=1)
        rc = np.tensordot(w, c, axes=1)
        rAc = np.tensordot(w, np.einsum("emij,emj->emi", A, c), axes=1)
        cc = np.tensordot(w, np.sum(c**2, axis=2), axes=1)
        for g, gamma in enumerate(gammas):
            M = MA + gamma * MAA
            M = 0.5 * (M + np.swapaxes(M, 1, 2))
            r = rc + gamma * rAc
            coef = _solve_batch(M, r, config.singular_policy, supports)
            q = base + gamma * cc - np.einsum("mi,mi->m", r, coef)
            for l, lam in enumerate(lams):
                best[g][l].offer(q + lam * k, supports, coef)
            if log:
                entries.extend(zip(supports, q.tolist()))
    return best, entries


def _result(stats, w, b, gamma, lam, entries=None):
    beta = np.zeros(stats.p)
    beta[list(b.support)] = b.coef
    beta.setflags(write=False)
    support = tuple(int(j) for j in np.flatnonzero(beta))
    if entries is not None:
        entries = [(S, v + lam * len(S)) for S, v in entries]
    return FitResult(
        beta=beta,
        support=support,
        objective=l0_objective(stats, w, beta, gamma, lam),
        gamma=float(gamma),
        lam=float(lam),
        per_support_log=entries,
    )


def exhaustive_eills(stats, weights, config: SearchConfig = SearchConfig(), log=False) -> FitResult:
    """Global minimizer of the EILLS objective (``config.lam`` is ignored)."""
    best, entries = _search(stats, weights, [config.gamma], [0.0], config, log=log)
    return _result(stats, weights, best[0][0], config.gamma, 0.0, entries)


def l0_exhaustive(stats, weights, config: SearchConfig, log=False) -> FitResult:
    """Global minimizer of the EILLS objective plus ``lam * |S|``."""
    best, entries = _search(stats, weights, [config.gamma], [config.lam], config, log=log)
    return _result(stats, weights, best[0][0], config.gamma, config.lam, entries)


def gamma_path(stats, weights, gamma_grid, lam=0.0, config: SearchConfig = SearchConfig()):
    """One fit per ``gamma`` in the (ascending) grid."""
    grid = [float(g) for g in gamma_grid]
    if not grid:
        raise ConfigurationError("gamma grid is empty")
    if any(g < 0 for g in grid):
        raise ConfigurationError("gamma grid entries must be nonnegative")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("gamma grid must be ascending")
    config = replace(config, lam=lam)
    best, _ = _search(stats, weights, grid, [lam], config)
    return [_result(stats, weights, best[g][0], gamma, lam) for g, gamma in enumerate(grid)]


def lambda_path(stats, weights, lambda_grid, gamma, config: SearchConfig = SearchConfig()):
    """One l0-EILLS fit per ``lambda``; per-support solves are shared."""
    grid = [float(v) for v in lambda_grid]
    if not grid or any(v < 0 for v in grid):
        raise ConfigurationError("lambda grid must be nonempty and nonnegative")
    config = replace(config, gamma=gamma)
    best, _ = _search(stats, weights, [gamma], grid, config)
    return [_result(stats, weights, best[0][l], gamma, lam) for l, lam in enumerate(grid)]


def pooled_least_squares(stats, weights, support=None, singular_policy="reject") -> np.ndarray:
    """Weighted pooled least squares, optionally restricted to ``support``."""
    S = range(stats.p) if support is None else support
    beta, _ = minimize_on_support(stats, weights, S, 0.0, singular_policy)
    return beta
