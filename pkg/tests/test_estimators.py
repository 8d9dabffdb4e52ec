import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ivbandits import (Dataset, LogBarMode, NoiseBounds, estimate_theta_2sls, estimate_theta_ols,
                       estimate_theta_psi, fit_gamma_ols, log_bar, make_compliance, oracle_ci_width,
                       p2sls_ci_width, sample_rounds)
from ivbandits.errors import SingularDesign
from ivbandits.estimators import sigma_nu_bound

from conftest import random_stochastic


def test_fit_gamma_noiseless(rng):
    Z = rng.normal(size=(30, 3))
    G = rng.normal(size=(3, 3))
    np.testing.assert_allclose(fit_gamma_ols(Dataset(Z, Z @ G, np.zeros(30))), G, atol=1e-10)


def test_fit_gamma_symmetric_noise_cancels():
    G = np.array([[0.7, 0.3], [0.2, 0.8]])
    Z = np.vstack([np.eye(2), np.eye(2)])
    X = Z @ G + np.array([[0.1, -0.1], [-0.1, 0.1], [-0.1, 0.1], [0.1, -0.1]])
    np.testing.assert_allclose(fit_gamma_ols(Dataset(Z, X, np.zeros(4))), G, atol=1e-12)


def test_fit_gamma_consistency(rng):
    G = random_stochastic(rng, 3)
    env = make_compliance(G, [0.3, 0.1, -0.2])
    data = sample_rounds(env, rng.integers(0, 3, size=10_000), rng)
    assert np.linalg.norm(fit_gamma_ols(data) - G, 2) <= 0.1


def test_singular_design_errors():
    data = Dataset(np.ones((5, 2)), np.ones((5, 2)), np.ones(5))
    with pytest.raises(SingularDesign):
        fit_gamma_ols(data)
    with pytest.raises(SingularDesign):
        estimate_theta_psi(data, np.eye(2))
    with pytest.raises(SingularDesign):
        estimate_theta_2sls(data)


def test_psi_noiseless_recovery(rng):
    theta = np.array([0.3, -1.0, 2.0])
    Z = rng.normal(size=(20, 3))
    np.testing.assert_allclose(estimate_theta_psi(Dataset(Z, Z, Z @ theta), np.eye(3)), theta, atol=1e-10)
    G = random_stochastic(rng, 3)
    X = Z @ G
    np.testing.assert_allclose(estimate_theta_psi(Dataset(Z, X, X @ theta), G), theta, atol=1e-10)


def test_psi_identity_is_textbook_ols(rng):
    Z = rng.normal(size=(50, 4))
    Y = rng.normal(size=50)
    data = Dataset(Z, rng.normal(size=(50, 4)), Y)
    expected = np.linalg.lstsq(Z, Y, rcond=None)[0]
    np.testing.assert_allclose(estimate_theta_psi(data, np.eye(4)), expected, atol=1e-10)


def test_2sls_identity(rng):
    G = random_stochastic(rng, 3)
    env = make_compliance(G, [0.5, 0.0, 1.0])
    data = sample_rounds(env, rng.integers(0, 3, size=500), rng)
    np.testing.assert_allclose(estimate_theta_2sls(data), estimate_theta_psi(data, fit_gamma_ols(data)),
                               atol=1e-10)
    X = data.Z @ G
    np.testing.assert_allclose(estimate_theta_2sls(Dataset(data.Z, X, X @ env.theta)), env.theta, atol=1e-10)


def test_motivating_oracle_vs_ols(motivating, rng):
    idx = np.tile(np.arange(6), 100_000 // 6 + 1)[:100_000]
    data = sample_rounds(motivating, idx, rng)
    theta = motivating.theta
    assert np.max(np.abs(estimate_theta_psi(data, motivating.gamma) - theta)) <= 0.05
    assert np.max(np.abs(estimate_theta_2sls(data) - theta)) <= 0.05
    # regressing Y on Z alone estimates Gamma theta, not theta
    assert abs(estimate_theta_psi(data, np.eye(6))[0] - theta[0]) > 0.1
    # naive regression on the treatments is biased by the preference shock
    assert abs(estimate_theta_ols(data)[0] - theta[0]) > 0.1


def test_ols_bias_is_many_standard_errors(motivating):
    idx = np.repeat(np.arange(6), 500)
    ests, oracle = [], []
    for k in range(200):
        data = sample_rounds(motivating, idx, np.random.default_rng(k))
        ests.append(estimate_theta_ols(data)[0])
        oracle.append(estimate_theta_psi(data, motivating.gamma))
    ests, oracle = np.array(ests), np.array(oracle)
    se = ests.std(ddof=1) / np.sqrt(len(ests))
    assert abs(ests.mean() - motivating.theta[0]) > 5 * se
    se_o = oracle.std(axis=0, ddof=1) / np.sqrt(len(oracle))
    assert np.all(np.abs(oracle.mean(axis=0) - motivating.theta) <= 3 * se_o)


def test_sigma_nu_bound_examples():
    assert sigma_nu_bound(NoiseBounds(10.0, 4.0, 1.0), compliance=True) == pytest.approx(10.0)
    assert sigma_nu_bound(NoiseBounds(2.0, 1.0, 0.0)) == pytest.approx(2.0)
    assert sigma_nu_bound(NoiseBounds(10.0, 1.0, 2.0)) == pytest.approx(10.0)


def test_noise_bounds_derive_theta_norm():
    b = NoiseBounds(L_nu=10.0, L_eta=1.0)
    assert b.theta_norm_bound == pytest.approx(2.0)
    with pytest.warns(UserWarning):
        NoiseBounds(L_nu=3.0, L_eta=1.0, theta_norm_bound=2.0)


def test_log_bar_examples():
    Z = np.array([[1.0]])
    assert log_bar(Z, 1.0, d=1, L_z=1.0) == pytest.approx(8 * math.log(3) + 16 * math.log(48), rel=1e-12)
    assert log_bar(Z, 1.0, d=1, L_z=1.0) == pytest.approx(70.73, abs=0.01)
    assert log_bar(np.eye(6), 0.1, mode=LogBarMode.PRACTICAL) == pytest.approx(24 + math.log(10))
    # sigma_min(Z^T Z) >= 2: the log2^2 factor is 1
    Z2 = np.vstack([np.eye(3)] * 5)
    d, T, delta = 3, 15, 0.05
    expected = 8 * d * math.log(1 + 2 * T / (d * 2)) + 16 * math.log(2 * 6 ** d / delta)
    assert log_bar(Z2, delta, L_z=1.0) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(1e-4, 0.5))
def test_log_bar_positive_and_monotone_in_inverse_delta(a, b):
    lo, hi = sorted([a, b])
    Z = np.vstack([np.eye(3)] * 4)
    for mode in LogBarMode:
        assert log_bar(Z, hi, L_z=1.0, mode=mode) > 0
        assert log_bar(Z, lo, L_z=1.0, mode=mode) >= log_bar(Z, hi, L_z=1.0, mode=mode)


def test_oracle_width_examples(rng):
    Z = np.vstack([np.eye(2)] * 4)
    w = oracle_ci_width([1, 0], Z, np.eye(2), 1.0, 2 / math.e)
    assert w == pytest.approx(math.sqrt(0.5), rel=1e-12)
    G = random_stochastic(rng, 3)
    Z1 = rng.normal(size=(10, 3))
    w1 = oracle_ci_width([1, -1, 0], Z1, G, 2.0, 0.1)
    w4 = oracle_ci_width([1, -1, 0], np.vstack([Z1] * 4), G, 2.0, 0.1)
    assert w4 == pytest.approx(w1 / 2, rel=1e-10)
    perm = rng.permutation(10)
    assert oracle_ci_width([1, -1, 0], Z1[perm], G, 2.0, 0.1) == pytest.approx(w1, rel=1e-12)


def test_p2sls_width_reduces_to_oracle(rng):
    G = random_stochastic(rng, 3)
    Z = np.vstack([np.eye(3)] * 3)
    bounds = NoiseBounds(L_nu=2.0, L_eta=4.0, theta_norm_bound=0.0)
    p = p2sls_ci_width([1, -1, 0], Z, Z, G, bounds, 0.1)
    o = oracle_ci_width([1, -1, 0], Z, G, 2.0, 0.05)  # log(2/(delta/2)) = log(4/delta)
    assert p == pytest.approx(o, rel=1e-12)


def test_p2sls_width_monotone_in_both_stages(rng):
    G = random_stochastic(rng, 3)
    bounds = NoiseBounds(L_nu=20.0, L_eta=4.0, theta_norm_bound=1.5)
    base = np.vstack([np.eye(3)] * 2)
    widths = [[p2sls_ci_width([0, 1, -1], np.vstack([base] * a), np.vstack([base] * b), G, bounds, 0.1)
               for b in (1, 2, 4)] for a in (1, 2, 4)]
    widths = np.array(widths)
    assert np.all(np.diff(widths, axis=0) < 0) and np.all(np.diff(widths, axis=1) < 0)
