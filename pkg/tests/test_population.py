import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eills import ValidationError
from eills.population import (
    best_linear_restricted,
    gamma_star,
    pooled_ls_limit,
    population_moments,
    spurious_sets,
    summarize,
    support_diagnostics,
)
from eills.scm import LinearScmSpec, example1_spec, example_a1_spec, simulate_benchmark, simulate_linear_scm
from eills.solver import pooled_least_squares
from eills import compute_stats


def random_spec(seed, n_env=2):
    """Acyclic spec: causes of y come first, y's children last, B strictly lower triangular."""
    rng = np.random.default_rng(seed)
    p = int(rng.integers(3, 6))
    k = int(rng.integers(1, p))
    B = np.tril(rng.normal(scale=0.5, size=(p, p)), -1) * (rng.random((p, p)) < 0.5)
    beta = np.zeros(p)
    beta[:k] = rng.normal(size=k)
    alpha = np.zeros(p)
    alpha[k:] = rng.normal(size=p - k) * (rng.random(p - k) < 0.7)
    D = rng.uniform(0.5, 1.5, size=p)
    v0 = rng.uniform(0.2, 2.0, size=n_env)
    return LinearScmSpec(B, alpha, beta, D, v0)


# -- population_moments -----------------------------------------------------------


def test_example1_moments_by_hand():
    sigma, bias = population_moments(example1_spec(1.0, -0.5))
    np.testing.assert_allclose(sigma[0], [[0.5, 0.5], [0.5, 2.0]], atol=1e-15)
    np.testing.assert_allclose(bias[0], [0.0, 0.5], atol=1e-15)
    np.testing.assert_allclose(sigma[1], [[0.5, -0.25], [-0.25, 1.25]], atol=1e-15)
    np.testing.assert_allclose(bias[1], [0.0, -0.25], atol=1e-15)


def test_no_feedback_means_no_bias():
    spec = LinearScmSpec(np.array([[0, 0], [0.3, 0]]), [0.0, 0.0], [1.0, 0.5], [1.0, 2.0], [0.5, 3.0])
    sigma, bias = population_moments(spec)
    assert not bias.any()
    np.testing.assert_allclose(sigma[0], sigma[1], atol=1e-15)


def test_moments_match_monte_carlo():
    spec = example1_spec(2.0, -1.0)
    sigma, _ = population_moments(spec)
    ds = simulate_linear_scm(spec, 100_000, 8)
    np.testing.assert_allclose(compute_stats(ds).gram, sigma, atol=0.02 * 5)
    # entries are O(s^2); compare relative to scale as well
    np.testing.assert_allclose(compute_stats(ds).gram, sigma, rtol=0.02, atol=0.02)


# -- best_linear_restricted -------------------------------------------------------


def test_restricted_on_causal_set_is_beta_star():
    spec = example1_spec(1.0, -0.5)
    summ = summarize(spec)
    np.testing.assert_allclose(best_linear_restricted(summ, spec, (0,)), [[1, 0], [1, 0]], atol=1e-15)
    assert not best_linear_restricted(summ, spec, ()).any()


@pytest.mark.parametrize("s1,s2", [(1.0, -0.5), (2.0, 0.5), (0.5, 0.5)])
def test_restricted_on_x2_is_scalar_regression(s1, s2):
    spec = example1_spec(s1, s2)
    b = best_linear_restricted(summarize(spec), spec, (1,))
    for e, s in enumerate((s1, s2)):
        assert b[e, 1] == pytest.approx(s / (s * s + 1), rel=1e-14)
        assert b[e, 0] == 0.0


def test_restricted_identical_when_s_times_s_is_one():
    # s1 * s2 = 1: both environments share the predictor s/(s^2+1) on x2
    spec = example1_spec(2.0, 0.5)
    b = best_linear_restricted(summarize(spec), spec, (1,))
    assert b[0, 1] == pytest.approx(b[1, 1], rel=1e-14)
    assert b[0, 1] == pytest.approx(0.4, rel=1e-14)


def test_restricted_singular_raises():
    spec = LinearScmSpec(np.zeros((2, 2)), [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0])
    with pytest.raises(ValidationError):
        best_linear_restricted(summarize(spec, with_gamma_star=False), spec, (1,))


# -- support_diagnostics ----------------------------------------------------------


def test_diagnostics_example1_x2():
    spec = example1_spec(1.0, -0.5)
    summ = summarize(spec)
    d = support_diagnostics(summ, spec, (1,))
    assert d.b_S == pytest.approx(0.015625, rel=1e-14)
    assert d.b_bar_S == pytest.approx(0.5 * 0.25 + 0.5 * 0.0625, rel=1e-14)
    b1, b2 = 1 / 2, -0.5 / 1.25
    assert d.d_bar_S == pytest.approx(0.25 * (b1 - b2) ** 2, rel=1e-12)
    assert d.v_star_S == pytest.approx(summ.kappa_L**2 * d.d_bar_S / 2, rel=1e-14)


def test_diagnostics_vanish_on_causal_supersets():
    spec = example1_spec(1.0, -0.5)
    summ = summarize(spec)
    d = support_diagnostics(summ, spec, (0,))
    assert d.b_S == d.b_bar_S == 0 and d.d_bar_S == pytest.approx(0, abs=1e-28)
    assert d.xi_S == 1.0
    # linear surrogate with a causal set {1,2} and an independent extra variable 3
    lin = LinearScmSpec(np.zeros((4, 4)), [0, 0, 0, 0.8], [1.0, -1.0, 0, 0], np.ones(4), [0.5, 1.5])
    ls = summarize(lin)
    d = support_diagnostics(ls, lin, (0, 1, 2))
    assert d.b_S == 0 and d.d_bar_S == pytest.approx(0, abs=1e-24)


def test_xi_conventions_and_value():
    spec = example_a1_spec(0.5, 0.7, 1.0, 1.0, [0.5, 2.0])
    summ = summarize(spec)
    assert support_diagnostics(summ, spec, ()).xi_S == 1.0
    assert support_diagnostics(summ, spec, (0, 1)).xi_S == 1.0
    # S = {2}: W_S = (h + s, 1), T = {1}; xi = 1 - s * (h + s) v1 / ((h + s)^2 v1 + v2)
    s, h = 0.5, 0.7
    expected = 1 - s * (h + s) / ((h + s) ** 2 + 1)
    assert support_diagnostics(summ, spec, (1,)).xi_S == pytest.approx(expected, rel=1e-12)
    # environment-varying alpha has no single xi
    assert math.isnan(support_diagnostics(summarize(example1_spec(1, -0.5)), example1_spec(1, -0.5), (1,)).xi_S)


# -- spurious sets ----------------------------------------------------------------


def test_spurious_sets_examples():
    summ = summarize(example1_spec(1.0, -0.5))
    assert (summ.G, summ.G_omega) == ((1,), (1,))
    summ = summarize(example1_spec(1.0, -1.0))
    assert (summ.G, summ.G_omega) == ((1,), ())
    summ = summarize(LinearScmSpec(np.zeros((2, 2)), [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 2.0]))
    assert (summ.G, summ.G_omega) == ((), ())
    with pytest.raises(ValidationError):
        spurious_sets(summ, tol=0.0)


# -- gamma_star -------------------------------------------------------------------


def test_gamma_star_examples():
    assert summarize(example1_spec(0.7, 0.7)).gamma_star == math.inf
    assert summarize(example1_spec(2.0, 0.5)).gamma_star == math.inf
    g = summarize(example1_spec(1.0, -0.5)).gamma_star
    assert 0 < g < math.inf
    assert summarize(example1_spec(1.0, -1.0)).gamma_star == 0.0


def test_gamma_star_matches_manual_enumeration():
    spec = example1_spec(1.0, -0.5)
    summ = summarize(spec)
    ratios = [support_diagnostics(summ, spec, S) for S in [(1,), (0, 1)]]
    expected = max(d.b_S / d.d_bar_S for d in ratios) / summ.kappa_L**3
    assert summ.gamma_star == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("s1,s2", [(1.0, -0.5), (0.5, -1.0), (1.25, -0.5), (-0.25, 1.25), (0.8, 0.25)])
def test_scaling_display(s1, s2):
    """sqrt(b/d) over the closed-form rate is exactly (1+s1^2)(1+s2^2)/2 here."""
    spec = example1_spec(s1, s2)
    summ = summarize(spec)
    d = support_diagnostics(summ, spec, (1,))
    rate = abs(s1 + s2) / (abs(s2 - s1) * abs(1 - s1 * s2))
    ratio = math.sqrt(d.b_S / d.d_bar_S) / rate
    assert ratio == pytest.approx(0.5 * (1 + s1**2) * (1 + s2**2), rel=1e-10)
    assert 0.25 <= ratio <= 4


def test_gamma_star_p_cap():
    p = 21
    spec = LinearScmSpec(np.zeros((p, p)), np.zeros(p), np.r_[1.0, np.zeros(p - 1)], np.ones(p), [1.0])
    summ = summarize(spec)
    assert summ.gamma_star is None
    with pytest.raises(ValidationError):
        gamma_star(summ, spec)


# -- pooled limit -----------------------------------------------------------------


def test_pooled_limit_examples():
    spec = example1_spec(1.0, -0.5)
    summ = summarize(spec)
    sbar = np.array([[0.5, 0.125], [0.125, 1.625]])
    np.testing.assert_allclose(summ.pooled_limit, [1, 0] + np.linalg.solve(sbar, [0, 0.125]), rtol=1e-14)
    np.testing.assert_array_equal(pooled_ls_limit(summ, summ.weights), summ.pooled_limit)
    clean = summarize(LinearScmSpec(np.zeros((2, 2)), [0.0, 0.0], [1.0, 2.0], [1.0, 1.0], [1.0, 2.0]))
    np.testing.assert_array_equal(clean.pooled_limit, [1.0, 2.0])
    # lower bound ||sum w bias|| / kappa_U <= ||limit - beta*||
    assert np.linalg.norm(summ.weights @ summ.bias_vec) / summ.kappa_U <= np.linalg.norm(summ.pooled_limit - [1, 0])


def test_pooled_limit_monte_carlo():
    ds, _ = simulate_benchmark("example1", [1.0, -0.5], 1_000_000, 4, weights="equal")
    est = pooled_least_squares(compute_stats(ds), ds.weights)
    np.testing.assert_allclose(est, summarize(example1_spec(1.0, -0.5)).pooled_limit, atol=0.01)


def test_pooled_limit_singular():
    spec = LinearScmSpec(np.zeros((2, 2)), [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0])
    with pytest.raises(ValidationError, match="singular"):
        summarize(spec, with_gamma_star=False)


# -- properties -------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n_env=st.integers(1, 3))
def test_population_properties(seed, n_env):
    spec = random_spec(seed, n_env)
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n_env))
    summ = summarize(spec, w)
    assert set(summ.G_omega) <= set(summ.G)
    assert summ.kappa_L <= summ.kappa_U
    for sig in summ.sigma:
        np.testing.assert_array_equal(sig, sig.T)
        ev = np.linalg.eigvalsh(sig)
        assert summ.kappa_L <= ev.min() + 1e-12 and ev.max() <= summ.kappa_U + 1e-12
    S_star = spec.support
    np.testing.assert_allclose(summ.bias_vec[:, list(S_star)], 0, atol=1e-14)
    for k in range(len(S_star) + 1):
        for S in itertools.combinations(S_star, k):
            d = support_diagnostics(summ, spec, S, w)
            assert d.b_S == pytest.approx(0, abs=1e-20) and d.b_bar_S == pytest.approx(0, abs=1e-20)
            assert d.d_bar_S == pytest.approx(0, abs=1e-20)
    S = tuple(sorted(rng.choice(spec.p, size=int(rng.integers(1, spec.p + 1)), replace=False)))
    d = support_diagnostics(summ, spec, S, w)
    assert d.d_bar_S >= 0
    assert d.b_S <= n_env * d.b_bar_S * w.max() / w.min() + 1e-14
    assert d.v_star_S == pytest.approx(summ.kappa_L**2 * d.d_bar_S / 2, rel=1e-14, abs=1e-300)
    assert not d.beta_restricted[:, [j for j in range(spec.p) if j not in S]].any()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_restricted_predictor_minimizes_population_risk(seed):
    spec = random_spec(seed)
    summ = summarize(spec, with_gamma_star=False)
    rng = np.random.default_rng(seed)
    S = sorted(rng.choice(spec.p, size=int(rng.integers(1, spec.p + 1)), replace=False))
    B = best_linear_restricted(summ, spec, S)
    for e in range(spec.n_env):
        sig = summ.sigma[e]
        xy = sig @ spec.beta_star + summ.bias_vec[e]

        def risk(b):
            return b @ sig @ b - 2 * b @ xy

        base = risk(B[e])
        for _ in range(20):
            delta = np.zeros(spec.p)
            delta[S] = rng.normal(size=len(S))
            assert risk(B[e] + delta) >= base - 1e-12 * (1 + abs(base))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_gamma_star_invariant_under_relabeling(seed):
    spec = random_spec(seed, n_env=3)
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(3))
    perm = rng.permutation(3)
    swapped = LinearScmSpec(spec.B, spec.alpha[perm], spec.beta_star, spec.D_diag, spec.v0[perm])
    a = summarize(spec, w).gamma_star
    b = summarize(swapped, w[perm]).gamma_star
    if math.isinf(a):
        assert math.isinf(b)
    else:
        assert b == pytest.approx(a, rel=1e-8, abs=1e-12)
