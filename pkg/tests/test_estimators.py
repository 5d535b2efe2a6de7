import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from instances import feasible_jittered, infeasible_jittered, oracle_nig, random_model, random_subset

from lagnet.estimators import (MatrixEstimate, error_matrix, estimate, feasibility_margin,
                               largest_gap_threshold, min_exogenous_variance, oracle_threshold, osc,
                               ridge_inverse, threshold_support)
from lagnet.graphs import erdos_renyi, laplacian_weights
from lagnet.moments import analytic_lag_moments, empirical_lag_moments, stationary_covariance
from lagnet.noise import offset_noise
from lagnet.simulator import SimConfig, restrict, simulate


def test_osc():
    assert osc([3, 1, 2]) == 2
    assert osc([4.5] * 6) == 0
    m = np.array([[2, 0.5, 1], [0.5, 2, 0.5], [1, 0.5, 2]])
    assert osc(m[~np.eye(3, dtype=bool)]) == 0.5
    with pytest.raises(ValueError):
        osc([])


def test_one_lag_of_static_system_is_zero():
    a = laplacian_weights(erdos_renyi(5, 0.5, 0), 0.0)
    mom = analytic_lag_moments(a, offset_noise(5, 1.0, 3.0), 0, 3)
    assert not estimate(mom, "one_lag").values.any()


@pytest.mark.parametrize("jitter", [0.0, 0.3])
def test_granger_recovers_a_at_the_limit(jitter):
    rng = np.random.default_rng(int(jitter * 10))
    a, noise = random_model(rng, 8, 0.9, jitter=jitter)
    mom = analytic_lag_moments(a, noise, 0, 3)
    assert np.abs(estimate(mom, "granger").values - a.entries).max() <= 1e-10


def test_nig_matches_matrix_identity():
    rng = np.random.default_rng(5)
    a, noise = random_model(rng, 7, 0.8, jitter=0.2)
    s = [0, 2, 3, 6]
    est = estimate(analytic_lag_moments(a, noise, 0, 3, s), "nig")
    assert np.abs(est.values - oracle_nig(a, noise, s)).max() <= 1e-10


def test_precision_is_inverse_and_unknown_kind():
    a = laplacian_weights(erdos_renyi(5, 0.5, 1), 0.7)
    mom = analytic_lag_moments(a, offset_noise(5, 1.0, 0.0), 0, 3)
    np.testing.assert_allclose(estimate(mom, "precision").values @ mom[0], np.eye(5), atol=1e-12)
    with pytest.raises(ValueError):
        estimate(mom, "lasso")


def test_ridge_inverse_handles_singular():
    m = np.ones((3, 3))
    with pytest.raises(np.linalg.LinAlgError):
        ridge_inverse(np.zeros((3, 3)))
    inv = ridge_inverse(m)
    assert np.isfinite(inv).all()


def test_error_matrix_vanishes_for_diagonal_noise():
    a = laplacian_weights(erdos_renyi(6, 0.5, 2), 0.9)
    assert not error_matrix(a, offset_noise(6, 1.0, 0.0), range(6)).any()


def test_error_matrix_offset_constant():
    a = laplacian_weights(erdos_renyi(8, 0.5, 3), 0.9)
    err = error_matrix(a, offset_noise(8, 1.0, 5.0), [1, 4, 5])
    np.testing.assert_allclose(err, np.full((3, 3), 4.5), rtol=0, atol=1e-12)


def test_error_matrix_matches_lyapunov_oracle():
    rng = np.random.default_rng(10)
    a, noise = random_model(rng, 10, 0.9, jitter=0.3)
    s = [0, 1, 4, 7, 9]
    expected = oracle_nig(a, noise, s) / noise.sigma_gap_sq - a.restrict(s)
    assert np.abs(error_matrix(a, noise, s) - expected).max() <= 1e-8


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.sampled_from([5, 10, 20]), rho=st.sampled_from([0.5, 0.9]),
       jitter=st.sampled_from([0.0, 0.2]))
def test_limiting_error_identity(seed, n, rho, jitter):
    rng = np.random.default_rng(seed)
    a, noise = random_model(rng, n, rho, jitter=jitter)
    s = random_subset(rng, n)
    r0 = stationary_covariance(a, noise)
    m = a.entries
    nig = (m @ r0 - m @ m @ m @ r0)[np.ix_(s, s)]
    resid = nig / noise.sigma_gap_sq - a.restrict(s) - error_matrix(a, noise, s)
    assert np.abs(resid).max() <= 1e-8


def test_feasibility_diagonal_and_offset():
    a = laplacian_weights(erdos_renyi(7, 0.5, 4), 0.8)
    diag = feasibility_margin(a, offset_noise(7, 1.0, 0.0), range(7))
    assert diag.lhs == 0 and diag.feasible
    for beta in (0.0, 5.0, 50.0):
        rep = feasibility_margin(a, offset_noise(7, 1.0, beta), [0, 3, 5, 6])
        assert rep.lhs == 0 and rep.feasible and rep.osc_error == 0
        assert rep.consistency_bound == a.a_plus_min / 2


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.sampled_from([5, 10]), rho=st.sampled_from([0.5, 0.8, 0.95]))
def test_feasible_instances_are_structurally_consistent(seed, n, rho):
    rng = np.random.default_rng(seed)
    s = random_subset(rng, n)
    a, noise = feasible_jittered(rng, n, rho, s)
    rep = feasibility_margin(a, noise, s)
    assert rep.feasible and rep.lhs > 0
    assert rep.osc_error <= rep.consistency_bound


def test_report_text():
    a = laplacian_weights(erdos_renyi(4, 1.0, 0), 0.5)
    text = feasibility_margin(a, offset_noise(4, 1.0, 1.0), range(4)).to_text()
    assert "feasible=True" in text and "rhs=" in text


def test_min_exogenous_variance_already_feasible():
    a = laplacian_weights(erdos_renyi(6, 0.5, 5), 0.8)
    assert min_exogenous_variance(a, offset_noise(6, 1.0, 3.0)) == 0.0


def test_min_exogenous_variance_double_lhs():
    rng = np.random.default_rng(3)
    a, noise = infeasible_jittered(rng, 6, 0.8)
    rep = feasibility_margin(a, noise, range(6))
    # rescale the gap so lhs is exactly twice rhs: sigma_gap_sq' = spread / (2 rhs)
    spread = rep.lhs * noise.sigma_gap_sq
    from dataclasses import replace
    tuned = replace(noise, sigma_gap_sq=spread / (2 * rep.rhs))
    assert min_exogenous_variance(a, tuned) == pytest.approx(tuned.sigma_gap_sq, rel=1e-12)


def test_min_exogenous_variance_restores_feasibility():
    rng = np.random.default_rng(8)
    for _ in range(5):
        a, noise = infeasible_jittered(rng, 8, 0.9)
        xi = min_exogenous_variance(a, noise)
        assert xi > 0
        assert feasibility_margin(a, noise.with_exogenous(xi), range(8)).feasible
        assert not feasibility_margin(a, noise.with_exogenous(0.999 * xi), range(8)).feasible


def test_threshold_support_extremes():
    est = MatrixEstimate(np.arange(9.0).reshape(3, 3), "nig")
    assert not threshold_support(est, math.inf).any()
    full = threshold_support(est, -math.inf)
    assert full.sum() == 6 and not full.diagonal().any()


def test_oracle_threshold_recovers_support_on_feasible_instance():
    rng = np.random.default_rng(12)
    s = list(range(10))
    a, noise = feasible_jittered(rng, 10, 0.8, s, margin=0.9)
    est = estimate(analytic_lag_moments(a, noise, 0, 3, s), "nig")
    support = threshold_support(est, oracle_threshold(a, noise, s))
    assert np.array_equal(support, a.support.adjacency)


def test_largest_gap_threshold():
    assert largest_gap_threshold([0.0, 0.1, 1.0, 1.2]) == pytest.approx(0.55)


def test_nig_error_shrinks_with_n():
    rng = np.random.default_rng(2)
    a, noise = random_model(rng, 5, 0.7, jitter=0.2, beta=1.0)
    s = [0, 1, 3]
    target = a.restrict(s) + error_matrix(a, noise, s)
    medians = []
    for n in (1_000, 10_000, 100_000):
        errs = []
        for seed in range(7):
            ts = restrict(simulate(a, noise, n, SimConfig(seed=seed, extra_tail=3)), s)
            nig = estimate(empirical_lag_moments(ts, 0, 3), "nig").values
            errs.append(np.abs(nig / noise.sigma_gap_sq - target).max())
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]
