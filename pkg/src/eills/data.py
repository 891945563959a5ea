"""Multi-environment regression data, sufficient statistics and CSV/JSON I/O.

A dataset is an ordered collection of environments, each holding a design
matrix ``X`` (``n_e x p``) and a response ``y`` (``n_e``), together with
positive environment weights that sum to one. Every objective in the package
is a function of a handful of per-environment moments, collected in
:class:`SufficientStats`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError, ParseError, SchemaError, ValidationError

WEIGHT_SCHEMES = ("equal", "proportional")

#: Marginal nonlinear features supported by the enhanced regularizer.
FEATURES = {
    "square": np.square,
    "cosine": np.cos,
}


@dataclass(frozen=True, eq=False)
class EnvironmentSample:
    """Observations from a single environment."""

    design: np.ndarray
    response: np.ndarray
    env_id: object = None

    def __post_init__(self):
        X = np.array(self.design, dtype=float)
        y = np.array(self.response, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValidationError(f"design must be 2-d, got shape {X.shape}")
        if X.shape[0] < 1:
            raise ValidationError(f"environment {self.env_id!r} is empty")
        if X.shape[0] != y.shape[0]:
            raise ValidationError(
                f"environment {self.env_id!r}: design has {X.shape[0]} rows "
                f"but response has {y.shape[0]}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError(f"environment {self.env_id!r} contains NaN or Inf")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def centered(self) -> "EnvironmentSample":
        """Return a copy whose design columns have zero mean."""
        X = self.design - self.design.mean(axis=0)
        return EnvironmentSample(X, self.response, self.env_id)


def _check_weights(weights, n_env):
    w = np.array(weights, dtype=float).reshape(-1)
    if w.shape[0] != n_env:
        raise ValidationError(f"expected {n_env} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValidationError("environment weights must be finite and positive")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValidationError(f"environment weights must sum to 1 (got {w.sum()!r})")
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class MultiEnvDataset:
    """Ordered environments plus weights ``omega``.

    If ``weights`` is omitted the ``proportional`` scheme is used.
    """

    environments: tuple
    weights: np.ndarray = None

    def __post_init__(self):
        envs = tuple(self.environments)
        if len(envs) < 1:
            raise ValidationError("a dataset needs at least one environment")
        p = envs[0].p
        for env in envs:
            if env.p != p:
                raise ValidationError(
                    f"environment {env.env_id!r} has {env.p} columns, expected {p}"
                )
        object.__setattr__(self, "environments", envs)
        if self.weights is None:
            w = _scheme_weights([e.n for e in envs], "proportional")
        else:
            w = self.weights
        object.__setattr__(self, "weights", _check_weights(w, len(envs)))

    @classmethod
    def from_arrays(cls, X, y, env, weights="proportional") -> "MultiEnvDataset":
        """Build a dataset from stacked arrays and a per-row environment label.

        Environments are ordered by first appearance of their label.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        env = np.asarray(env)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if not (X.shape[0] == y.shape[0] == env.shape[0]):
            raise ValidationError("X, y and env must have the same number of rows")
        _, first = np.unique(env, return_index=True)
        labels = env[np.sort(first)]
        samples = tuple(
            EnvironmentSample(X[env == lab], y[env == lab], getattr(lab, "item", lambda: lab)())
            for lab in labels
        )
        return cls(samples).with_weights(weights)

    @property
    def n_env(self) -> int:
        return len(self.environments)

    @property
    def p(self) -> int:
        return self.environments[0].p

    @property
    def sizes(self) -> np.ndarray:
        return np.array([e.n for e in self.environments])

    @property
    def env_ids(self) -> list:
        return [e.env_id for e in self.environments]

    def with_weights(self, weights) -> "MultiEnvDataset":
        """Return a copy with new weights (a scheme name or an explicit vector)."""
        if isinstance(weights, str):
            weights = make_weights(self, weights)
        return MultiEnvDataset(self.environments, weights)

    def centered(self) -> "MultiEnvDataset":
        return MultiEnvDataset(tuple(e.centered() for e in self.environments), self.weights)

    def stacked(self):
        """Return ``(X, y, env_index)`` with all environments stacked in order."""
        X = np.vstack([e.design for e in self.environments])
        y = np.concatenate([e.response for e in self.environments])
        idx = np.repeat(np.arange(self.n_env), self.sizes)
        return X, y, idx


def _scheme_weights(sizes, scheme):
    sizes = np.asarray(sizes, dtype=float)
    if scheme == "equal":
        return np.full(sizes.shape[0], 1.0 / sizes.shape[0])
    if scheme == "proportional":
        return sizes / sizes.sum()
    raise ConfigurationError(f"unknown weight scheme {scheme!r}; expected one of {WEIGHT_SCHEMES}")


def make_weights(dataset: MultiEnvDataset, scheme: str = "proportional") -> np.ndarray:
    """Environment weights: ``equal`` (1/|E|) or ``proportional`` (n_e / sum n)."""
    return _scheme_weights(dataset.sizes, scheme)


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Per-environment moments, stacked along the first axis.

    Attributes
    ----------
    gram : ndarray, shape (E, p, p)
        ``X_e^T X_e / n_e``.
    xty : ndarray, shape (E, p)
        ``X_e^T y_e / n_e``.
    yty : ndarray, shape (E,)
        ``y_e^T y_e / n_e``.
    n : ndarray, shape (E,)
    features : dict
        Feature tag -> ``(hxy, hxx)`` where ``hxy[e, j] = mean(h(x_j) y)`` and
        ``hxx[e, j, :] = mean(h(x_j) x)``.
    """

    gram: np.ndarray
    xty: np.ndarray
    yty: np.ndarray
    n: np.ndarray
    features: dict = field(default_factory=dict)

    @property
    def n_env(self) -> int:
        return self.gram.shape[0]

    @property
    def p(self) -> int:
        return self.gram.shape[1]

    def feature(self, tag):
        try:
            return self.features[tag]
        except KeyError:
            raise ConfigurationError(
                f"no moments for feature {tag!r}; pass features=[{tag!r}] to compute_stats"
            ) from None

    def to_json(self) -> str:
        envs = [
            {
                "gram": self.gram[e].tolist(),
                "xty": self.xty[e].tolist(),
                "yty": float(self.yty[e]),
                "n": int(self.n[e]),
            }
            for e in range(self.n_env)
        ]
        return json.dumps({"environments": envs})

    @classmethod
    def from_json(cls, text: str) -> "SufficientStats":
        envs = json.loads(text)["environments"]
        return cls(
            gram=np.array([e["gram"] for e in envs], dtype=float),
            xty=np.array([e["xty"] for e in envs], dtype=float),
            yty=np.array([e["yty"] for e in envs], dtype=float),
            n=np.array([e["n"] for e in envs], dtype=int),
        )


def compute_stats(dataset: MultiEnvDataset, features: Sequence[str] = ()) -> SufficientStats:
    """Compute the moments every objective is evaluated from."""
    for tag in features:
        if tag not in FEATURES:
            raise ConfigurationError(f"unknown feature {tag!r}; expected one of {sorted(FEATURES)}")
    grams, xtys, ytys = [], [], []
    feats = {tag: ([], []) for tag in features}
    for env in dataset.environments:
        X, y, n = env.design, env.response, env.n
        g = X.T @ X / n
        grams.append(0.5 * (g + g.T))
        xtys.append(X.T @ y / n)
        ytys.append(y @ y / n)
        for tag in features:
            H = FEATURES[tag](X)
            feats[tag][0].append(H.T @ y / n)
            feats[tag][1].append(H.T @ X / n)
    return SufficientStats(
        gram=np.array(grams),
        xty=np.array(xtys),
        yty=np.array(ytys),
        n=dataset.sizes.copy(),
        features={tag: (np.array(a), np.array(b)) for tag, (a, b) in feats.items()},
    )


@dataclass(frozen=True)
class SampleSizeDiagnostics:
    n_star: float
    n_bar: float
    n_min: float
    n_dagger: float
    n_omega: float

    def as_dict(self):
        return {
            "n_star": self.n_star,
            "n_bar": self.n_bar,
            "n_min": self.n_min,
            "n_dagger": self.n_dagger,
            "n_omega": self.n_omega,
        }


def sample_size_diagnostics(dataset: MultiEnvDataset) -> SampleSizeDiagnostics:
    """Effective sample sizes of a weighted multi-environment design."""
    n = dataset.sizes.astype(float)
    w = dataset.weights
    return SampleSizeDiagnostics(
        n_star=float(np.min(n / w)),
        n_bar=float(1.0 / np.sum(w / n)),
        n_min=float(np.min(n)),
        n_dagger=float(1.0 / np.sum(w / n**1.5)),
        n_omega=float(1.0 / np.sum(w**2 / n)),
    )


def _fmt(x):
    return format(x, ".17g")


def write_csv(dataset: MultiEnvDataset, path) -> None:
    """Write ``env,y,x1,...,xp`` rows, environments in dataset order."""
    p = dataset.p
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["env", "y"] + [f"x{j + 1}" for j in range(p)])
        for env in dataset.environments:
            label = str(env.env_id)
            for xi, yi in zip(env.design, env.response):
                w.writerow([label, _fmt(yi)] + [_fmt(v) for v in xi])


def load_csv(path, center: bool = False, weights: str = "proportional") -> MultiEnvDataset:
    """Read a CSV with header ``env,y,x1,...,xp``.

    Environments appear in order of first occurrence; rows keep file order.
    With ``center=True`` each environment's columns are mean-centered.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        p = len(header) - 2
        expected = ["env", "y"] + [f"x{j + 1}" for j in range(p)]
        if p < 1 or header != expected:
            raise SchemaError(f"{path}: header must be env,y,x1,...,xp; got {','.join(header)}")
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p + 2:
                raise SchemaError(f"{path}: line {lineno} has {len(row)} fields, expected {p + 2}")
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            if not all(np.isfinite(vals)):
                raise ParseError(f"{path}: non-finite value", line=lineno)
            rows.setdefault(row[0], []).append(vals)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    samples = []
    for label, vals in rows.items():
        arr = np.array(vals)
        samples.append(EnvironmentSample(arr[:, 1:], arr[:, 0], label))
    ds = MultiEnvDataset(tuple(samples)).with_weights(weights)
    return ds.centered() if center else ds
