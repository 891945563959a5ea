"""Closed-form population quantities of a :class:`~eills.scm.LinearScmSpec`.

With ``W_e = (I - B - alpha_e beta_star')^{-1}`` and ``u_e = W_e alpha_e``::

    Sigma_e       = W_e D W_e' + v0_e u_e u_e'
    E[eps_e x_e]  = v0_e u_e

From these follow the restricted best linear predictors, the spurious sets
``G`` / ``G_omega``, the bias (``b_S``, ``b_bar_S``) and bias-difference
(``d_bar_S``) functionals, the identification threshold ``gamma_star`` and the
probability limit of pooled least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Optional

import numpy as np

from .exceptions import EillsError, ValidationError

ZERO_TOL = 1e-10
RATIO_TOL = 1e-12
MAX_P_GAMMA = 20


@dataclass(frozen=True, eq=False)
class PopulationSummary:
    """Population moments and derived sets; ``G`` / ``G_omega`` are 0-based."""

    sigma: np.ndarray
    bias_vec: np.ndarray
    weights: np.ndarray
    beta_star: np.ndarray
    G: tuple
    G_omega: tuple
    kappa_L: float
    kappa_U: float
    pooled_limit: np.ndarray
    gamma_star: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma.tolist(),
            "bias_vec": self.bias_vec.tolist(),
            "weights": self.weights.tolist(),
            "beta_star": self.beta_star.tolist(),
            "G": [j + 1 for j in self.G],
            "G_omega": [j + 1 for j in self.G_omega],
            "kappa_L": self.kappa_L,
            "kappa_U": self.kappa_U,
            "pooled_limit": self.pooled_limit.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SupportDiagnostics:
    support: tuple
    beta_restricted: np.ndarray
    b_S: float
    b_bar_S: float
    d_bar_S: float
    v_star_S: float
    xi_S: float

    def to_dict(self) -> dict:
        return {
            "support": [j + 1 for j in self.support],
            "beta_restricted": self.beta_restricted.tolist(),
            "b_S": self.b_S,
            "b_bar_S": self.b_bar_S,
            "d_bar_S": self.d_bar_S,
            "v_star_S": self.v_star_S,
            "xi_S": self.xi_S,
        }


def population_moments(spec):
    """Per-environment covariance ``(E, p, p)`` and bias ``E[eps x]`` ``(E, p)``."""
    sig, bias = [], []
    D = np.diag(spec.D_diag)
    for e in range(spec.n_env):
        try:
            W = spec.total_effect(e)
        except np.linalg.LinAlgError as exc:
            raise EillsError(f"I - B - alpha beta' is singular in environment {e}") from exc
        u = W @ spec.alpha[e]
        S = W @ D @ W.T + spec.v0[e] * np.outer(u, u)
        sig.append(0.5 * (S + S.T))
        bias.append(spec.v0[e] * u)
    return np.array(sig), np.array(bias)


def _default_weights(spec, weights):
    if weights is None:
        return np.full(spec.n_env, 1.0 / spec.n_env)
    w = np.asarray(weights, dtype=float)
    if w.shape != (spec.n_env,) or np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
        raise ValidationError("weights must be positive, one per environment, summing to 1")
    return w


def spurious_sets(summary, weights=None, tol=ZERO_TOL):
    """``(G, G_omega)``: covariates biased in some environment / on weighted average."""
    if tol <= 0:
        raise ValidationError("tol must be positive")
    w = summary.weights if weights is None else np.asarray(weights, dtype=float)
    bias = summary.bias_vec
    G = tuple(int(j) for j in np.flatnonzero(np.any(np.abs(bias) > tol, axis=0)))
    Gw = tuple(int(j) for j in np.flatnonzero(np.abs(w @ bias) > tol))
    return G, Gw


def pooled_ls_limit(summary, weights=None) -> np.ndarray:
    """Probability limit of pooled least squares, ``beta* + Sigma_bar^{-1} sum_e w_e bias_e``."""
    w = summary.weights if weights is None else np.asarray(weights, dtype=float)
    sbar = np.tensordot(w, summary.sigma, axes=1)
    evals = np.linalg.eigvalsh(sbar)
    if evals[0] <= ZERO_TOL * max(evals[-1], 1.0):
        raise ValidationError("pooled covariance is singular")
    return summary.beta_star + np.linalg.solve(sbar, w @ summary.bias_vec)


def summarize(spec, weights=None, with_gamma_star=True) -> PopulationSummary:
    """Build the :class:`PopulationSummary` of ``spec`` under ``weights`` (default equal).

    ``gamma_star`` is filled in when ``with_gamma_star`` and ``p <= 20``.
    """
    w = _default_weights(spec, weights)
    sigma, bias = population_moments(spec)
    evals = np.linalg.eigvalsh(sigma)
    summary = PopulationSummary(
        sigma=sigma,
        bias_vec=bias,
        weights=w,
        beta_star=spec.beta_star,
        G=(),
        G_omega=(),
        kappa_L=float(evals[:, 0].min()),
        kappa_U=float(evals[:, -1].max()),
        pooled_limit=spec.beta_star,
    )
    G, Gw = spurious_sets(summary, w)
    summary = replace(summary, G=G, G_omega=Gw, pooled_limit=pooled_ls_limit(summary, w))
    if with_gamma_star and spec.p <= MAX_P_GAMMA:
        summary = replace(summary, gamma_star=gamma_star(summary, spec, w))
    return summary


def best_linear_restricted(summary, spec, support) -> np.ndarray:
    """Per-environment best linear predictor on ``support``, shape ``(E, p)``."""
    S = sorted(support)
    out = np.zeros((spec.n_env, spec.p))
    if not S:
        return out
    T = [j for j in spec.support if j not in S]
    for e in range(spec.n_env):
        sig = summary.sigma[e]
        sig_S = sig[np.ix_(S, S)]
        evals = np.linalg.eigvalsh(sig_S)
        if evals[0] <= ZERO_TOL * max(evals[-1], 1.0):
            raise ValidationError(f"covariance restricted to {[j + 1 for j in S]} is singular")
        rhs = summary.bias_vec[e, S] + sig[np.ix_(S, T)] @ spec.beta_star[T]
        out[e, S] = spec.beta_star[S] + np.linalg.solve(sig_S, rhs)
    return out


def _xi(spec, S, Gw):
    if not S or not set(S) & set(Gw) or set(spec.support) <= set(S):
        return 1.0
    if not np.all(spec.alpha == spec.alpha[0]):
        return math.nan
    T = [j for j in spec.support if j not in S]
    W = spec.total_effect(0)
    D = np.diag(spec.D_diag)
    WS, WT = W[S, :], W[T, :]
    inner = np.linalg.solve(WS @ D @ WS.T, WS @ D @ WT.T @ spec.beta_star[T])
    return float(1.0 - spec.alpha[0] @ WS.T @ inner)


def support_diagnostics(summary, spec, support, weights=None) -> SupportDiagnostics:
    w = summary.weights if weights is None else np.asarray(weights, dtype=float)
    S = tuple(sorted(int(j) for j in support))
    beta_eS = best_linear_restricted(summary, spec, S)
    bias_S = summary.bias_vec[:, list(S)]
    b_S = float(np.sum((w @ bias_S) ** 2))
    b_bar = float(w @ np.sum(bias_S**2, axis=1))
    centre = w @ beta_eS
    d_bar = float(w @ np.sum((beta_eS - centre) ** 2, axis=1))
    return SupportDiagnostics(
        support=S,
        beta_restricted=beta_eS,
        b_S=b_S,
        b_bar_S=b_bar,
        d_bar_S=d_bar,
        v_star_S=summary.kappa_L**2 * d_bar / 2,
        xi_S=_xi(spec, list(S), summary.G_omega),
    )


def spurious_supports(summary, p):
    """All supports touching ``G_omega``, by size then lexicographically."""
    Gw = set(summary.G_omega)
    for k in range(1, p + 1):
        for S in combinations(range(p), k):
            if Gw.intersection(S):
                yield S


def gamma_star(summary, spec, weights=None) -> float:
    """Identification threshold ``kappa_L^-3 max_S b_S / d_bar_S``.

    The maximum runs over supports touching ``G_omega``. Returns ``inf`` when
    some such support has a vanishing bias-difference but nonzero bias, and
    ``0.0`` when ``G_omega`` is empty.
    """
    if spec.p > MAX_P_GAMMA:
        raise ValidationError(f"gamma_star enumerates 2^p supports; p={spec.p} exceeds {MAX_P_GAMMA}")
    best = 0.0
    for S in spurious_supports(summary, spec.p):
        d = support_diagnostics(summary, spec, S, weights)
        if d.d_bar_S <= RATIO_TOL:
            if d.b_S > RATIO_TOL:
                return math.inf
            continue
        best = max(best, d.b_S / d.d_bar_S)
    return best / summary.kappa_L**3
