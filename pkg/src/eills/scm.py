"""Synthetic multi-environment data from structural causal models.

Two families are provided:

* :class:`LinearScmSpec` -- the acyclic linear model
  ``x = B x + alpha y + eps_x``, ``y = beta_star' x + eps_0`` where only the
  variance of ``eps_0`` (and optionally ``alpha``) changes across environments.
  Population quantities for it live in :mod:`eills.population`.
* named benchmarks (:class:`Fig2`, :class:`Example1`, :class:`ExampleA1`,
  :class:`OracleGaussian`), including the 12-covariate nonlinear benchmark
  with interventions on ``x4`` and ``x7``.

Seeds are passed straight to :func:`numpy.random.default_rng`, so an integer
or a sequence of integers both work. Multi-environment simulations draw
environment ``e`` with seed ``[seed, e]``.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import EnvironmentSample, MultiEnvDataset
from .exceptions import ConfigurationError, ValidationError


@dataclass(frozen=True, eq=False)
class LinearScmSpec:
    """Linear SCM shared by all environments up to ``v0`` (and ``alpha``).

    Parameters
    ----------
    B : (p, p) array
        ``B[i, j]`` is the direct effect of ``x_j`` on ``x_i``.
    alpha : (p,) or (E, p) array
        Effect of ``y`` on each covariate; a 2-d array gives one row per
        environment.
    beta_star : (p,) array
    D_diag : (p,) array
        Variances of the covariate noise ``eps_x``.
    v0 : (E,) array
        Per-environment variance of ``eps_0``.
    """

    B: np.ndarray
    alpha: np.ndarray
    beta_star: np.ndarray
    D_diag: np.ndarray
    v0: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta_star, dtype=float).reshape(-1)
        p = beta.shape[0]
        v0 = np.atleast_1d(np.asarray(self.v0, dtype=float))
        B = np.asarray(self.B, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim == 1:
            alpha = np.tile(alpha, (v0.shape[0], 1))
        D = np.asarray(self.D_diag, dtype=float).reshape(-1)
        if B.shape != (p, p) or D.shape != (p,) or alpha.shape != (v0.shape[0], p):
            raise ValidationError(
                f"inconsistent shapes: B {B.shape}, alpha {alpha.shape}, "
                f"beta_star {beta.shape}, D_diag {D.shape}, v0 {v0.shape}"
            )
        for name, arr in (("B", B), ("alpha", alpha), ("beta_star", beta), ("D_diag", D), ("v0", v0)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
        if np.any(D < 0):
            raise ValidationError("D_diag entries must be nonnegative")
        if np.any(v0 <= 0):
            raise ValidationError("v0 entries must be positive")
        for name, arr in (("B", B), ("alpha", alpha), ("beta_star", beta), ("D_diag", D), ("v0", v0)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for e in range(self.n_env):
            self._check_acyclic(e)

    @property
    def p(self) -> int:
        return self.beta_star.shape[0]

    @property
    def n_env(self) -> int:
        return self.v0.shape[0]

    @property
    def support(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.beta_star))

    def effect_matrix(self, env: int) -> np.ndarray:
        """``B + alpha_e beta_star'``: the covariate-to-covariate map after substituting y."""
        return self.B + np.outer(self.alpha[env], self.beta_star)

    def _check_acyclic(self, env):
        A = self.effect_matrix(env)
        ts = graphlib.TopologicalSorter()
        for i in range(self.p):
            ts.add(i, *[j for j in range(self.p) if A[i, j] != 0])
        try:
            ts.prepare()
        except graphlib.CycleError as exc:
            cycle = [int(j) + 1 for j in exc.args[1]]
            raise ValidationError(
                f"environment {env}: covariate graph has a cycle through x{cycle}"
            ) from None

    def total_effect(self, env: int) -> np.ndarray:
        """``W = (I - B - alpha beta_star')^{-1}``."""
        return np.linalg.inv(np.eye(self.p) - self.effect_matrix(env))

    def to_dict(self) -> dict:
        alpha = self.alpha
        shared = bool(np.all(alpha == alpha[0]))
        return {
            "B": self.B.tolist(),
            "alpha": alpha[0].tolist() if shared else alpha.tolist(),
            "beta_star": self.beta_star.tolist(),
            "D_diag": self.D_diag.tolist(),
            "v0": self.v0.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearScmSpec":
        missing = {"B", "alpha", "beta_star", "D_diag", "v0"} - set(d)
        if missing:
            raise ValidationError(f"spec is missing fields {sorted(missing)}")
        return cls(d["B"], d["alpha"], d["beta_star"], d["D_diag"], d["v0"])


def sample_linear_scm(spec: LinearScmSpec, env: int, n: int, seed) -> EnvironmentSample:
    """Draw ``n`` samples of environment ``env``: ``x = W(eps_x + alpha eps_0)``."""
    if n < 1:
        raise ValidationError("n must be positive")
    rng = np.random.default_rng(seed)
    W = spec.total_effect(env)
    eps_x = rng.standard_normal((n, spec.p)) * np.sqrt(spec.D_diag)
    eps_0 = rng.standard_normal(n) * np.sqrt(spec.v0[env])
    X = (eps_x + eps_0[:, None] * spec.alpha[env]) @ W.T
    y = X @ spec.beta_star + eps_0
    return EnvironmentSample(X, y, env + 1)


def simulate_linear_scm(spec: LinearScmSpec, n: int, seed, weights="equal") -> MultiEnvDataset:
    envs = tuple(sample_linear_scm(spec, e, n, [seed, e]) for e in range(spec.n_env))
    return MultiEnvDataset(envs).with_weights(weights)


def example1_spec(s1: float, s2: float) -> LinearScmSpec:
    """Two-environment toy: ``x1 = sqrt(.5) e1``, ``y = x1 + sqrt(.5) e0``, ``x2 = s y + e2``."""
    return LinearScmSpec(
        B=np.zeros((2, 2)),
        alpha=[[0.0, s1], [0.0, s2]],
        beta_star=[1.0, 0.0],
        D_diag=[0.5, 1.0],
        v0=[0.5, 0.5],
    )


def example_a1_spec(s, h, v1, v2, v0) -> LinearScmSpec:
    """Toy with ``x2 = h x1 + s y + sqrt(v2) e2`` and environment-varying ``v0``."""
    B = np.zeros((2, 2))
    B[1, 0] = h
    return LinearScmSpec(B=B, alpha=[0.0, s], beta_star=[1.0, 0.0], D_diag=[v1, v2], v0=v0)


# -- named benchmarks ------------------------------------------------------------

FIG2_P = 12
FIG2_BETA = np.array([3.0, 2.0, -0.5] + [0.0] * 9)
FIG2_S_STAR = (0, 1, 2)
FIG2_G = (6, 7, 8)


@dataclass(frozen=True)
class Fig2:
    """12-covariate nonlinear SCM; ``env`` is 1 or 2."""

    env: int = 1


@dataclass(frozen=True)
class Example1:
    s: float


@dataclass(frozen=True)
class ExampleA1:
    s: float
    h: float
    v1: float
    v2: float
    v0: float


@dataclass(frozen=True)
class OracleGaussian:
    """``x ~ N(0, sigma^2 I)``, ``y | x ~ N(beta_star' x, sigma^2)``."""

    beta_star: tuple
    sigma: float = 1.0


def _sample_fig2(env, n, rng):
    u = rng.standard_normal((n, 13))
    x = np.empty((n, FIG2_P + 1))  # column 0 unused so x[:, j] is x_j
    x[:, 1] = u[:, 0]
    x[:, 4] = u[:, 3] if env == 1 else u[:, 3] ** 2 - 1
    x[:, 2] = np.sin(x[:, 4]) + u[:, 1]
    x[:, 3] = np.cos(x[:, 4]) + u[:, 2]
    x[:, 5] = np.sin(x[:, 3] + u[:, 4])
    x[:, 10] = 2.5 * x[:, 1] + 1.5 * x[:, 2] + u[:, 9]
    y = 3 * x[:, 1] + 2 * x[:, 2] - 0.5 * x[:, 3] + u[:, 12]
    x[:, 6] = 0.8 * y * u[:, 5]
    if env == 1:
        x[:, 7] = 0.5 * x[:, 3] + y + u[:, 6]
    else:
        x[:, 7] = 4 * x[:, 3] + np.tanh(y) + u[:, 6]
    x[:, 8] = 0.5 * x[:, 7] - y + x[:, 10] + u[:, 7]
    x[:, 9] = np.tanh(x[:, 7]) + 0.1 * np.cos(x[:, 8]) + u[:, 8]
    x[:, 11] = 0.4 * (x[:, 7] + x[:, 8]) * u[:, 10]
    x[:, 12] = u[:, 11]
    return x[:, 1:], y


def sample_benchmark(tag, n: int, seed) -> EnvironmentSample:
    """Draw ``n`` samples from one environment of a named benchmark."""
    if n < 1:
        raise ValidationError("n must be positive")
    rng = np.random.default_rng(seed)
    if isinstance(tag, Fig2):
        if tag.env not in (1, 2):
            raise ConfigurationError(f"fig2 has environments 1 and 2, not {tag.env}")
        X, y = _sample_fig2(tag.env, n, rng)
        return EnvironmentSample(X, y, tag.env)
    if isinstance(tag, Example1):
        e0, e1, e2 = rng.standard_normal((3, n))
        x1 = np.sqrt(0.5) * e1
        y = x1 + np.sqrt(0.5) * e0
        x2 = tag.s * y + e2
        return EnvironmentSample(np.column_stack([x1, x2]), y, tag)
    if isinstance(tag, ExampleA1):
        if min(tag.v1, tag.v2, tag.v0) <= 0:
            raise ValidationError("variances must be positive")
        e0, e1, e2 = rng.standard_normal((3, n))
        x1 = np.sqrt(tag.v1) * e1
        y = x1 + np.sqrt(tag.v0) * e0
        x2 = tag.h * x1 + tag.s * y + np.sqrt(tag.v2) * e2
        return EnvironmentSample(np.column_stack([x1, x2]), y, tag)
    if isinstance(tag, OracleGaussian):
        beta = np.asarray(tag.beta_star, dtype=float)
        if tag.sigma <= 0:
            raise ValidationError("sigma must be positive")
        X = tag.sigma * rng.standard_normal((n, beta.shape[0]))
        y = X @ beta + tag.sigma * rng.standard_normal(n)
        return EnvironmentSample(X, y, tag)
    raise ConfigurationError(f"unknown benchmark tag {tag!r}")


@dataclass(frozen=True)
class GroundTruth:
    """0-based index sets; ``G`` is ``None`` when not analytically known."""

    beta_star: np.ndarray
    S_star: tuple
    G: Optional[tuple] = None
    spec: Optional[LinearScmSpec] = field(default=None, repr=False)

    def to_sidecar(self) -> dict:
        """JSON-ready form with 1-based variable indices."""
        out = {
            "beta_star": [float(b) for b in self.beta_star],
            "S_star": [j + 1 for j in self.S_star],
        }
        if self.G is not None:
            out["G"] = [j + 1 for j in self.G]
        return out


BENCHMARKS = ("fig2", "example1", "example_a1", "oracle_gaussian")


def simulate_benchmark(name: str, params, n: int, seed, weights="equal"):
    """Simulate every environment of a named benchmark.

    ``params`` by name:

    * ``fig2``: none
    * ``example1``: ``(s1, s2, ...)``, one slope per environment
    * ``example_a1``: ``(s, h, v1, v2, v0_1, v0_2, ...)``
    * ``oracle_gaussian``: ``(sigma, beta_1, ..., beta_p)``; one environment

    Returns ``(dataset, truth)``.
    """
    try:
        params = [float(v) for v in params]
    except ValueError:
        raise ConfigurationError(f"{name}: parameters must be numbers, got {list(params)}") from None
    if name == "fig2":
        if params:
            raise ConfigurationError("fig2 takes no parameters")
        tags = [Fig2(1), Fig2(2)]
        truth = GroundTruth(FIG2_BETA.copy(), FIG2_S_STAR, FIG2_G)
    elif name == "example1":
        if len(params) < 1:
            raise ConfigurationError("example1 needs one slope per environment")
        s = [float(v) for v in params]
        tags = [Example1(v) for v in s]
        G = (1,) if any(v != 0 for v in s) else ()
        truth = GroundTruth(np.array([1.0, 0.0]), (0,), G, example1_spec(*s) if len(s) == 2 else None)
    elif name == "example_a1":
        if len(params) < 5:
            raise ConfigurationError("example_a1 needs s, h, v1, v2 and one v0 per environment")
        s, h, v1, v2 = (float(v) for v in params[:4])
        v0 = [float(v) for v in params[4:]]
        tags = [ExampleA1(s, h, v1, v2, v) for v in v0]
        truth = GroundTruth(np.array([1.0, 0.0]), (0,), (1,) if s != 0 else (), example_a1_spec(s, h, v1, v2, v0))
    elif name == "oracle_gaussian":
        if len(params) < 2:
            raise ConfigurationError("oracle_gaussian needs sigma and at least one coefficient")
        sigma, *beta = (float(v) for v in params)
        tags = [OracleGaussian(tuple(beta), sigma)]
        b = np.array(beta)
        truth = GroundTruth(b, tuple(int(j) for j in np.flatnonzero(b)), ())
    else:
        raise ConfigurationError(f"unknown benchmark {name!r}; expected one of {BENCHMARKS}")
    envs = []
    for e, tag in enumerate(tags):
        s = sample_benchmark(tag, n, [seed, e])
        envs.append(EnvironmentSample(s.design, s.response, e + 1))
    return MultiEnvDataset(tuple(envs)).with_weights(weights), truth


def parse_benchmark(text: str):
    """Split ``"name:a,b,c"`` into ``(name, [a, b, c])``."""
    name, _, rest = text.partition(":")
    params = [p for p in rest.split(",") if p.strip()] if rest else []
    return name.strip(), params
