import numpy as np
import pytest

from eills import MultiEnvDataset
from eills.data import EnvironmentSample


def random_dataset(rng, p, n_env=2, n_range=(20, 60), weights=None, env_ids=None):
    """Heterogeneous Gaussian environments with a shared linear signal."""
    beta = rng.normal(size=p)
    envs = []
    for e in range(n_env):
        n = int(rng.integers(*n_range))
        scale = rng.uniform(0.5, 2.0, size=p)
        X = rng.normal(size=(n, p)) * scale
        y = X @ beta + rng.normal(size=n) * rng.uniform(0.5, 1.5)
        envs.append(EnvironmentSample(X, y, e + 1 if env_ids is None else env_ids[e]))
    w = weights
    if w is None:
        w = rng.dirichlet(np.ones(n_env) * 2)
    return MultiEnvDataset(tuple(envs), w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny():
    """Single environment, X = I_2, y = (1, 2)."""
    return MultiEnvDataset((EnvironmentSample(np.eye(2), np.array([1.0, 2.0]), "a"),))


# -- acceptance report ------------------------------------------------------------

ACCEPTANCE = {}


def record(criterion, passed, detail):
    """Store a one-line verdict for the end-of-run acceptance report."""
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
