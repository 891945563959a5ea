"""Pooled risk, focused invariance regularizers and the combined objectives.

Everything here is evaluated from :class:`~eills.data.SufficientStats`; no
raw data is touched. For a coefficient vector ``beta`` with support ``S``:

* pooled risk   ``sum_e w_e * mean_e (y - x beta)^2``
* regularizer   ``sum_{j in S} sum_e w_e * mean_e(x_j (y - x beta))^2``
* EILLS         ``risk + gamma * regularizer``
* l0-EILLS      ``risk + gamma * regularizer + lambda * |S|``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError


@dataclass(frozen=True)
class ObjectiveValue:
    risk: float
    reg: float
    penalty: float
    total: float

    def as_dict(self):
        return {"risk": self.risk, "reg": self.reg, "penalty": self.penalty, "total": self.total}


def _prepare(stats, weights, beta):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if beta.shape[0] != stats.p:
        raise ValidationError(f"beta has length {beta.shape[0]}, stats have p={stats.p}")
    if w.shape[0] != stats.n_env:
        raise ValidationError(f"{w.shape[0]} weights for {stats.n_env} environments")
    return w, beta


def residual_moments(stats, beta):
    """``mean_e(x_j (y - x beta))`` for every environment, shape (E, p)."""
    return stats.xty - stats.gram @ beta


def pooled_risk(stats, weights, beta) -> float:
    w, beta = _prepare(stats, weights, beta)
    per_env = (stats.gram @ beta) @ beta - 2.0 * stats.xty @ beta + stats.yty
    # Cancellation can leave a tiny negative residual for an exact fit.
    return max(float(w @ per_env), 0.0)


def invariance_reg(stats, weights, beta) -> float:
    w, beta = _prepare(stats, weights, beta)
    on = beta != 0
    if not on.any():
        return 0.0
    m = residual_moments(stats, beta)[:, on]
    return float(w @ np.sum(m**2, axis=1))


def enhanced_reg(stats, weights, beta, feature) -> float:
    """Regularizer with extra residual moments against ``h(x_j)``.

    ``feature`` is a tag (``"square"`` or ``"cosine"``) whose moments must have
    been requested in :func:`~eills.data.compute_stats`.
    """
    w, beta = _prepare(stats, weights, beta)
    hxy, hxx = stats.feature(feature)
    on = beta != 0
    if not on.any():
        return 0.0
    lin = residual_moments(stats, beta)[:, on]
    nonlin = (hxy - hxx @ beta)[:, on]
    return float(w @ (np.sum(lin**2, axis=1) + np.sum(nonlin**2, axis=1)))


def eills_objective(stats, weights, beta, gamma) -> ObjectiveValue:
    if gamma < 0:
        raise ValidationError(f"gamma must be nonnegative, got {gamma}")
    risk = pooled_risk(stats, weights, beta)
    reg = invariance_reg(stats, weights, beta)
    return ObjectiveValue(risk, reg, 0.0, risk + gamma * reg)


def l0_objective(stats, weights, beta, gamma, lam) -> ObjectiveValue:
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    q = eills_objective(stats, weights, beta, gamma)
    penalty = lam * int(np.count_nonzero(np.asarray(beta)))
    return ObjectiveValue(q.risk, q.reg, penalty, q.total + penalty)
