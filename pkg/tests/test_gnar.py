import numpy as np
import pytest
from numpy.testing import assert_allclose

from memnet.autocov import var_autocov
from memnet.errors import InsufficientData, NotStationary
from memnet.gnar import (
    GnarOrder,
    GnarParams,
    build_filter_matrices,
    check_stationarity,
    companion_matrix,
    filters_from_graph,
    gnar_acv,
    gnar_ls_fit,
    stationarity_margin,
)
from memnet.network import build_neighbour_stages, compute_weights, graph_from_edges
from memnet.simulate import SimConfig, simulate_fignar

from conftest import random_stationary_model


def test_two_node_filter_assembly():
    g = graph_from_edges(2, [(1, 2)])
    order = GnarOrder(1, (1,))
    params = GnarParams(alpha=np.array([0.35]), beta=(np.array([[0.2]]),))
    f = filters_from_graph(params, g, order)
    assert_allclose(f[0], [[0.35, 0.2], [0.2, 0.35]])


def test_zero_beta_is_diagonal(fivenet):
    order = GnarOrder(2, (1, 1))
    params = GnarParams(alpha=np.array([[0.1, 0.2]] * 5).reshape(5, 2) * np.arange(1, 6)[:, None] / 3,
                        beta=(np.zeros((1, 1)), np.zeros((1, 1))))
    f = filters_from_graph(params, fivenet, order)
    for j in range(2):
        assert_allclose(f[j], np.diag(np.diag(f[j])))


def test_dgp1_filter_matches_manual_assembly(dgp1, dgp1_filters):
    # entrywise oracle from the fixture edge list with equal weights
    ns = build_neighbour_stages(dgp1.graph, 1)
    manual = np.zeros((5, 5))
    for i in range(1, 6):
        nbrs = sorted(ns.stage(i, 1))
        for l in nbrs:
            manual[i - 1, l - 1] = 0.2 / len(nbrs)
    manual += 0.35 * np.eye(5)
    assert_allclose(dgp1_filters[0], manual, atol=1e-15)


def test_stationarity_condition(dgp1):
    assert check_stationarity(dgp1.params, dgp1.order, 5)
    bad = GnarParams(alpha=np.array([0.9]), beta=(np.array([[0.2]]),))
    assert not check_stationarity(bad, dgp1.order, 5)
    edge = GnarParams(alpha=np.array([0.8]), beta=(np.array([[0.2]]),))
    assert not check_stationarity(edge, dgp1.order, 5)  # exactly one: strict


def test_stationarity_implies_spectral_radius():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(200):
        graph, order, params, _, _ = random_stationary_model(rng, n=4)
        if not check_stationarity(params, order, 4):
            continue
        f = filters_from_graph(params, graph, order)
        rho = np.max(np.abs(np.linalg.eigvals(companion_matrix(f))))
        assert rho < 1.0
        checked += 1
    assert checked > 100


def test_acv_white_noise():
    f = [np.zeros((3, 3))]
    acv = gnar_acv(f, np.array([1.0, 2.0, 3.0]), 4)
    assert_allclose(acv.gammas[0], np.diag([1.0, 2.0, 3.0]))
    assert_allclose(acv.gammas[1:], 0.0)


def test_acv_scalar_ar1():
    acv = gnar_acv([np.array([[0.5]])], np.array([1.0]), 8)
    for h in range(9):
        assert_allclose(acv.gammas[h, 0, 0], 0.5 ** h / 0.75, rtol=1e-12)


def test_acv_dgp1_fixed_point_oracle(dgp1_filters):
    acv = gnar_acv(dgp1_filters, np.ones(5), 10)
    a = dgp1_filters[0]
    g = np.eye(5)
    for _ in range(3000):
        g = a @ g @ a.T + np.eye(5)
    assert np.max(np.abs(acv.gammas[0] - g)) < 1e-12


def test_acv_yule_walker_order_one(dgp1_filters):
    acv = gnar_acv(dgp1_filters, np.ones(5), 12)
    a = dgp1_filters[0]
    for h in range(1, 13):
        assert_allclose(acv.gammas[h], a @ acv.gammas[h - 1], atol=1e-10)


def test_acv_negative_lag_transpose(dgp1_filters):
    acv = gnar_acv(dgp1_filters, np.ones(5), 6)
    for h in range(7):
        assert_allclose(acv.at(-h), acv.at(h).T)


def test_acv_rejects_nonstationary():
    with pytest.raises(NotStationary):
        gnar_acv([np.eye(2) * 1.01], np.ones(2), 4)


def test_acv_truncation_reported(dgp1_filters):
    acv = var_autocov(list(dgp1_filters), np.ones(5), None, trunc_tol=1e-12)
    # spectral radius 0.55 decays below 1e-12 within ~47 lags
    assert 40 <= acv.m_trunc <= 55
    assert np.max(np.abs(acv.gammas[-1])) < 1e-11 * np.max(np.abs(acv.gammas[0]))


def test_companion_matrix_order_two():
    mats = [np.array([[0.3]]), np.array([[0.2]])]
    assert_allclose(companion_matrix(mats), [[0.3, 0.2], [1.0, 0.0]])


def test_ls_fit_recovers_noiseless_ar(fivenet):
    # deterministic recursion with zero noise: exact coefficient recovery
    rng = np.random.default_rng(0)
    order = GnarOrder(1, (1,))
    params = GnarParams(alpha=np.array([0.5]), beta=(np.array([[0.3]]),))
    f = filters_from_graph(params, fivenet, order)
    x = np.empty((60, 5))
    x[0] = rng.standard_normal(5)
    for t in range(1, 60):
        x[t] = f[0] @ x[t - 1]
    est, sig = gnar_ls_fit(x, fivenet, order, "global")
    assert_allclose(est.alpha, [0.5], atol=1e-9)
    assert_allclose(est.beta[0], [[0.3]], atol=1e-9)
    assert np.max(sig) < 1e-18


def test_ls_fit_zero_stage_is_per_node_ar(fivenet):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((400, 5))
    order = GnarOrder(1, (0,))
    est, _ = gnar_ls_fit(x, fivenet, order, "individual")
    # white noise: per-node AR coefficients near zero
    assert np.max(np.abs(est.alpha)) < 0.2
    assert est.alpha.shape == (5, 1)


def test_ls_fit_consistency(dgp1, fivenet):
    panel = simulate_fignar(dgp1.params, fivenet, dgp1.order, np.zeros(5),
                            np.ones(5), 2000, SimConfig(seed=77))
    est, sig = gnar_ls_fit(panel.values, fivenet, dgp1.order, "global")
    assert abs(est.alpha[0] - 0.35) < 0.05
    assert abs(est.beta[0][0, 0] - 0.2) < 0.05
    assert np.max(np.abs(sig - 1.0)) < 0.15


def test_ls_fit_needs_enough_data(fivenet):
    rng = np.random.default_rng(2)
    with pytest.raises(InsufficientData):
        gnar_ls_fit(rng.standard_normal((6, 5)), fivenet,
                    GnarOrder(1, (1,)), "individual")
