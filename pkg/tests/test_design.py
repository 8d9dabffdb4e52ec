import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ivbandits import (Design, SolverOptions, e_design, make_compliance, make_gaussian, make_interpolation,
                       oracle_lower_bound_samples, rho_star, round_design, xy_design)
from ivbandits.design import (RoundingParams, minimax_certificate, minimax_value, pair_differences, r_min,
                              uniform_design)
from ivbandits.errors import BadDelta, DegenerateSpan, TooFewSamples
from ivbandits.numerics import sigma_min

from conftest import EXP2_THETA, random_stochastic
from oracles import grid_e_design, grid_minimax, xy_objective


def test_two_arm_symmetric():
    des = xy_design(np.array([[1.0, -1.0]]), np.eye(2), np.eye(2))
    np.testing.assert_allclose(des.weights, [0.5, 0.5], atol=1e-6)
    assert des.objective_value == pytest.approx(4.0, rel=1e-6)
    assert des.support_size == 2


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0])
def test_scaled_gamma(rng, c):
    Z = rng.normal(size=(4, 3))
    G = rng.normal(size=(3, 3))
    pairs = pair_differences(rng.normal(size=(4, 3)))
    a = xy_design(pairs, Z, G)
    b = xy_design(pairs, Z, c * G)
    assert b.objective_value == pytest.approx(a.objective_value / c ** 2, rel=1e-5)


def test_xy_matches_grid_on_compliance(rng):
    G = random_stochastic(rng, 3, diag=1.0)
    pairs = pair_differences(np.eye(3))
    des = xy_design(pairs, np.eye(3), G)
    ref, _ = grid_minimax(pairs, np.eye(3) @ G)
    assert abs(des.objective_value - ref) <= 0.01 * ref
    assert des.objective_value <= ref * (1 + 1e-9)


def test_xy_value_is_certified(rng, exp1_known):
    Y = pair_differences(exp1_known.W)
    M = exp1_known.Z @ exp1_known.gamma
    des = xy_design(Y, exp1_known.Z, exp1_known.gamma)
    assert des.lower_bound <= des.objective_value
    assert (des.objective_value - des.lower_bound) <= 1e-4 * des.objective_value
    # no random feasible design does better than the certified lower bound
    for _ in range(200):
        lam = rng.dirichlet(np.ones(6))
        assert minimax_value(Y, M, lam) >= des.lower_bound * (1 - 1e-9)


def test_symmetric_ties_are_solved_exactly():
    # two symmetric pairs: Frank-Wolfe alone cycles here, the certified solver must not
    env = make_interpolation(4, EXP2_THETA, 1.0)
    star = 3
    Y = np.array([env.W[star] - env.W[j] for j in range(3)])
    des = xy_design(Y, env.Z, env.gamma)
    # closed form for e_4 - e_j, j=1..3 under Gamma = I: min (1/l4 + 1/l) with l4 + 3 l = 1
    l4 = 1 / (1 + math.sqrt(3))
    expected = 1 / l4 + 3 / (1 - l4)
    assert des.objective_value == pytest.approx(expected, rel=1e-6)


def test_fw_method_is_available_and_reasonable(rng):
    G = random_stochastic(rng, 3)
    pairs = pair_differences(np.eye(3))
    fw = xy_design(pairs, np.eye(3), G, SolverOptions(method="fw"))
    ref = xy_design(pairs, np.eye(3), G)
    # the uncertified fallback converges slowly on the nonsmooth max
    assert ref.objective_value <= fw.objective_value <= 1.02 * ref.objective_value


def test_fw_trace_is_monotone(rng):
    G = random_stochastic(rng, 4)
    des = xy_design(pair_differences(np.eye(4)), np.eye(4), G,
                    SolverOptions(method="fw", record_trace=True, max_iters=300))
    tr = np.array(des.trace)
    assert len(tr) > 0 and np.all(np.diff(tr) <= 1e-12)
    des = xy_design(pair_differences(np.eye(4)), np.eye(4), G, SolverOptions(record_trace=True))
    tr = np.array(des.trace)
    assert np.all(np.diff(tr) <= 1e-12)


def test_relabeling_and_rotation_invariance(rng):
    Z = rng.normal(size=(5, 3))
    G = rng.normal(size=(3, 3)) + 2 * np.eye(3)
    W = rng.normal(size=(4, 3))
    base = xy_design(pair_differences(W), Z, G).objective_value
    perm = rng.permutation(5)
    assert xy_design(pair_differences(W), Z[perm], G).objective_value == pytest.approx(base, rel=1e-5)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    # z -> Q z, Gamma -> Q Gamma Q^T, w -> Q w leaves every quadratic form unchanged
    rot = xy_design(pair_differences(W @ Q.T), Z @ Q.T, Q @ G @ Q.T).objective_value
    assert rot == pytest.approx(base, rel=1e-5)


def test_degenerate_span():
    # z only excites the first coordinate: the pair e1 - e2 is not estimable
    with pytest.raises(DegenerateSpan):
        xy_design(np.array([[1.0, -1.0]]), np.array([[1.0, 0.0]]), np.eye(2))


def test_singular_design_value_uses_limit():
    # pair lies in the range of a rank-deficient design: finite value
    Y = np.array([[1.0, 0.0]])
    M = np.eye(2)
    assert minimax_value(Y, M, [1.0, 0.0]) == pytest.approx(1.0)
    assert math.isinf(minimax_value(Y, M, [1.0, 0.0], allow_singular=False))
    assert math.isinf(minimax_value(np.array([[0.0, 1.0]]), M, [1.0, 0.0]))


def test_certificate_is_a_lower_bound(rng):
    for _ in range(10):
        Z = rng.normal(size=(4, 3))
        G = rng.normal(size=(3, 3)) + 2 * np.eye(3)
        Y = pair_differences(rng.normal(size=(4, 3)))
        ref, _ = grid_minimax(Y, Z @ G, res=0.05)
        lam = rng.dirichlet(np.ones(4))
        assert minimax_certificate(Y, Z @ G, lam) <= ref * (1 + 1e-9)


def test_e_design_standard_basis():
    for d in (2, 3, 5):
        des, kappa = e_design(np.eye(d))
        np.testing.assert_allclose(des.weights, np.full(d, 1 / d), atol=1e-6)
        assert kappa == pytest.approx(1 / d, rel=1e-6)


def test_e_design_three_arm_grid():
    Z = np.array([[1.0, 0.0], [0.0, 1.0], [1 / math.sqrt(2), 1 / math.sqrt(2)]])
    _, kappa = e_design(Z)
    ref, _ = grid_e_design(Z)
    assert abs(kappa - ref) <= 0.01 * ref


def test_e_design_duplicate_arm_never_hurts(rng):
    Z = rng.normal(size=(4, 3))
    _, k0 = e_design(Z)
    _, k1 = e_design(np.vstack([Z, Z[1]]))
    assert k1 >= k0 * (1 - 1e-6)


def test_e_design_degenerate():
    with pytest.raises(DegenerateSpan):
        e_design(np.array([[1.0, 0.0], [2.0, 0.0]]))


@pytest.mark.parametrize("lam,N,expected", [
    ([0.5, 0.5], 10, [5, 5]),
    ([0.3, 0.7], 10, [3, 7]),
    ([1 / 3, 1 / 3, 1 / 3], 10, [4, 3, 3]),
])
def test_round_design_examples(lam, N, expected):
    counts = round_design(Design(np.array(lam), 0.0, len(lam)), N)
    np.testing.assert_array_equal(counts, expected)


def test_round_design_too_few():
    des = Design(np.array([0.5, 0.5]), 0.0, 2)
    with pytest.raises(TooFewSamples):
        round_design(des, 3, RoundingParams(1.0, r_min(des, 1.0)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8), st.integers(0, 500))
def test_round_design_properties(raw, extra):
    lam = np.array(raw) / np.sum(raw)
    des = Design(lam, 0.0, len(lam))
    N = len(lam) + extra
    counts = round_design(des, N)
    assert counts.sum() == N
    assert np.all(counts >= 1)


def test_r_min_examples():
    assert r_min(Design(np.array([0.5, 0.5]), 0.0, 2), 1.0) == 4
    assert r_min(Design(np.full(6, 1 / 6), 0.0, 6), 0.5) == 24
    des = Design(np.full(5, 0.2), 0.0, 5)
    vals = [r_min(des, w) for w in (0.1, 0.25, 0.5, 0.75, 1.0)]
    assert vals == sorted(vals, reverse=True)


def test_rho_star_two_arm_mab():
    env = make_compliance(np.eye(2), [1.0, 0.0])
    assert rho_star(env) == pytest.approx(4.0, rel=1e-6)
    # with a floor above the gap the denominator grows
    assert rho_star(env, 2.0) == pytest.approx(1.0, rel=1e-6)


def test_rho_star_floor_is_monotone(exp1_known):
    r0 = rho_star(exp1_known)
    assert rho_star(exp1_known, 0.05) <= r0 * (1 + 1e-9)
    assert rho_star(exp1_known, 0.5) <= rho_star(exp1_known, 0.05) * (1 + 1e-9)


def test_rho_star_interpolation_ratio():
    r1 = rho_star(make_interpolation(4, EXP2_THETA, 0.7))
    r2 = rho_star(make_interpolation(4, EXP2_THETA, 0.35))
    assert 2 <= r2 / r1 <= 8


def test_oracle_lower_bound_examples(motivating):
    zero = make_gaussian(np.eye(2), np.eye(2), np.eye(2), [1.0, 0.0])
    # only the outcome noise is active: sigma^2 = v^T Sigma v = 1
    Sigma = np.zeros((3, 3))
    Sigma[2, 2] = 1.0
    r = rho_star(zero)
    assert oracle_lower_bound_samples(zero, Sigma, 0.05) == pytest.approx(r * math.log(20) / 2, rel=1e-9)
    assert oracle_lower_bound_samples(zero, 4 * np.eye(3), 0.05) == \
        pytest.approx(4 * oracle_lower_bound_samples(zero, np.eye(3), 0.05), rel=1e-9)
    v = oracle_lower_bound_samples(motivating, np.eye(7), 0.05)
    assert math.isfinite(v) and v > 0
    with pytest.raises(BadDelta):
        oracle_lower_bound_samples(zero, np.eye(3), 0.2)


def test_uniform_design():
    des = uniform_design(4)
    np.testing.assert_allclose(des.weights, 0.25)
    assert des.support_size == 4


def test_design_json():
    des = xy_design(np.array([[1.0, -1.0]]), np.eye(2), np.eye(2))
    js = des.to_json()
    assert set(js) == {"weights", "objective", "support"}
    assert js["support"] == 2


def test_compliance_bound_first_display(rng):
    # min_lambda max ||e_j - e_j'||^2 <= d max ||Gamma^{-T}(e_j - e_j')||^2 <= 2 d / sigma_min^2
    # (uniform lambda gives A^{-1} = d Gamma^{-1} Gamma^{-T} with Gamma in SEM orientation)
    for _ in range(10):
        d = int(rng.integers(2, 7))
        G = random_stochastic(rng, d, diag=1.0)
        pairs = pair_differences(np.eye(d))
        val = xy_design(pairs, np.eye(d), G).objective_value
        inv = np.linalg.inv(G).T
        first = d * max(float(np.sum((inv @ p) ** 2)) for p in pairs)
        assert val <= first * (1 + 1e-9)
        assert first <= 2 * d / sigma_min(G) ** 2 * (1 + 1e-9)


def test_compliance_rho_bound_needs_factor_two():
    # two-armed bandit: rho* = 1/l1 + 1/l2 = 4 while d / sigma_min^2 / gap^2 = 2
    env = make_compliance(np.eye(2), [1.0, 0.0])
    assert rho_star(env) == pytest.approx(2 * 2 / sigma_min(env.gamma) ** 2 / 1.0, rel=1e-6)
    env = make_interpolation(4, EXP2_THETA, 0.8)
    assert rho_star(env) <= 2 * 4 / sigma_min(env.gamma) ** 2 / 0.08 ** 2


def test_rounding_inflation_small_case():
    env = make_compliance(random_stochastic(np.random.default_rng(3), 4), [0.1, 0.4, 0.2, 0.3])
    pairs = pair_differences(env.W)
    des = xy_design(pairs, env.Z, env.gamma)
    N = 10 * r_min(des, 1.0)
    counts = round_design(des, N)
    xi = counts / N
    assert xy_objective(pairs, env.Z, env.gamma, xi) <= 2 * des.objective_value
