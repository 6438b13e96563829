import numpy as np
import pytest
from numpy.testing import assert_allclose

from memnet.autocov import fignar_acv, gnarfi_acv
from memnet.errors import NotStationary, UnknownPreset, ValidationError
from memnet.fracdiff import fiwn_diag_acv
from memnet.gnar import GnarParams, filters_from_graph
from memnet.simulate import (
    SeriesPanel,
    SimConfig,
    dgp_preset,
    load_fixture_graph,
    replicate_rng,
    simulate_fignar,
    simulate_fiwn,
    simulate_gnarfi,
    simulate_preset,
)


def test_sim_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(method="magic")
    with pytest.raises(ValidationError):
        SimConfig(burn_in=-1)


def test_matched_seed_determinism(dgp1):
    cfg = SimConfig(seed=123)
    a = simulate_preset(dgp1, "fignar", 150, cfg)
    b = simulate_preset(dgp1, "fignar", 150, cfg)
    assert np.array_equal(a.values, b.values)
    c = simulate_preset(dgp1, "fignar", 150, SimConfig(seed=124))
    assert not np.array_equal(a.values, c.values)


def test_zero_memory_same_panels_both_orderings(dgp1):
    cfg = SimConfig(seed=42)
    zero = np.zeros(5)
    a = simulate_fignar(dgp1.params, dgp1.graph, dgp1.order, zero, dgp1.sigma2,
                        200, cfg)
    b = simulate_gnarfi(dgp1.params, dgp1.graph, dgp1.order, zero, dgp1.sigma2,
                        200, cfg)
    assert np.array_equal(a.values, b.values)


def test_fiwn_zero_memory_iid():
    z = simulate_fiwn(np.zeros(2), np.ones(2), 50_000, SimConfig(seed=3))
    x = z.values
    lag1 = np.mean(x[1:] * x[:-1], axis=0)
    assert np.max(np.abs(lag1)) < 3.0 / np.sqrt(50_000)


def test_fiwn_variance_matches_gamma_value():
    t = 100_000
    z = simulate_fiwn(np.array([0.25]), np.ones(1), t,
                      SimConfig(seed=7, filter_order=20000))
    target = fiwn_diag_acv(np.array([0.25]), np.ones(1), 0)[0, 0]
    # three-sigma band using the known quadratic variation of the estimator
    acv_tbl = fiwn_diag_acv(np.array([0.25]), np.ones(1), t - 1)[0]
    se = np.sqrt(2.0 * np.sum((1 - np.arange(t) / t) * acv_tbl ** 2) / t)
    assert abs(z.values.var() - target) < 3 * se


def test_exact_and_truncated_methods_agree_distributionally(dgp1):
    # same acv checks pass for both simulators
    t, reps = 300, 60
    f = filters_from_graph(dgp1.params, dgp1.graph, dgp1.order)
    target = fignar_acv(f, dgp1.d, dgp1.sigma2, 1).gammas[0]
    for method in ("truncated_filter", "exact"):
        vs = []
        for r in range(reps):
            cfg = SimConfig(seed=1000 + r, method=method, filter_order=5000)
            panel = simulate_preset(dgp1, "fignar", t, cfg)
            vs.append(panel.values.T @ panel.values / t)
        mean = np.mean(vs, axis=0)
        se = np.std(vs, axis=0, ddof=1) / np.sqrt(reps)
        z = np.abs(mean - target) / np.where(se > 0, se, 1.0)
        # d=0.45 entries carry truncation/burn-in bias at this short length;
        # the medium-memory block must be unbiased
        assert np.max(z[:3, :3]) < 4.0


def test_gnarfi_reduces_to_fiwn_when_filter_zero(dgp1):
    zerop = GnarParams(alpha=np.array([0.0]), beta=(np.array([[0.0]]),))
    cfg = SimConfig(seed=5)
    a = simulate_gnarfi(zerop, dgp1.graph, dgp1.order, dgp1.d, dgp1.sigma2, 100, cfg)
    b = simulate_fiwn(dgp1.d, dgp1.sigma2, 100, cfg)
    assert_allclose(a.values, b.values)


def test_nonstationary_rejected(dgp1):
    bad = GnarParams(alpha=np.array([0.9]), beta=(np.array([[0.2]]),))
    with pytest.raises(NotStationary):
        simulate_fignar(bad, dgp1.graph, dgp1.order, dgp1.d, dgp1.sigma2,
                        50, SimConfig(seed=1))


def test_replicate_streams_differ():
    a = replicate_rng(7, 0).standard_normal(4)
    b = replicate_rng(7, 1).standard_normal(4)
    c = replicate_rng(7, 0).standard_normal(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_series_panel_accessors():
    p = SeriesPanel(values=np.arange(6.0).reshape(3, 2), labels=("a", "b"))
    assert p.t == 3 and p.n == 2
    assert_allclose(p.node_major(), [0, 2, 4, 1, 3, 5])


def test_fixture_graphs():
    g5 = load_fixture_graph("fivenet")
    assert g5.num_nodes == 5 and g5.num_edges == 5
    g10 = load_fixture_graph("tennet")
    assert g10.num_nodes == 10
    with pytest.raises(UnknownPreset):
        load_fixture_graph("nonet")


def test_presets():
    p1 = dgp_preset("DGP1")
    assert_allclose(p1.d, [0.05, 0.15, 0.25, 0.35, 0.45])
    assert p1.params.alpha_mode == "global"
    assert_allclose(p1.theta()[:2], [0.35, 0.2])

    p2 = dgp_preset("DGP2")
    assert_allclose(p2.d, 0.25)
    assert p2.d_mode == "global"
    assert p2.theta().size == 1 + 1 + 1 + 5

    p3 = dgp_preset("DGP3")
    assert p3.params.alpha_mode == "individual"
    assert_allclose(p3.params.alpha.ravel(), [-0.4, 0.3, 0.3, 0.2, -0.3])
    assert_allclose(p3.params.beta[0], [[0.4]])
    assert abs(p3.params.alpha[0]) + 0.4 < 1.0

    p1t = dgp_preset("DGP1", "tennet")
    assert_allclose(p1t.d, 0.05 + 2 * np.arange(10) / 45)
    assert_allclose(p1t.d[-1], 0.45)

    with pytest.raises(UnknownPreset):
        dgp_preset("DGP9")


def test_dgp3_tennet_stationary():
    p = dgp_preset("DGP3", "tennet")
    from memnet.gnar import check_stationarity

    assert check_stationarity(p.params, p.order, 10)


def test_exact_embedding_covariance_is_toeplitz():
    # the draw is a fixed linear map of the noise; feeding basis vectors
    # recovers the map and its Gram matrix must equal the target acv
    from scipy.linalg import toeplitz

    from memnet.fracdiff import fiwn_diag_acv
    from memnet.simulate import _circulant_embedding_draw

    t = 10
    row = fiwn_diag_acv(np.array([0.4]), np.array([1.7]), t - 1)[0]
    m = 2 * (t - 1)
    lin = np.column_stack([_circulant_embedding_draw(row, e) for e in np.eye(m)])
    assert np.max(np.abs(lin @ lin.T - toeplitz(row))) < 1e-12


def test_exact_embedding_panel_deterministic():
    from memnet.simulate import simulate_fiwn_exact_embedding

    d = np.array([0.1, 0.45])
    a = simulate_fiwn_exact_embedding(d, np.ones(2), 64, np.random.default_rng(8))
    b = simulate_fiwn_exact_embedding(d, np.ones(2), 64, np.random.default_rng(8))
    assert np.array_equal(a, b)
    assert a.shape == (64, 2)


def test_stronger_memory_means_slower_acf_decay(dgp1):
    # across replicates, nodes with larger memory exponents keep their
    # lag-20 sample autocorrelation higher (rank correlation positive)
    from scipy.stats import spearmanr

    wins = 0
    for rep in range(12):
        panel = simulate_preset(dgp1, "fignar", 500, SimConfig(seed=4000 + rep))
        x = panel.values - panel.values.mean(axis=0)
        rho20 = np.sum(x[20:] * x[:-20], axis=0) / np.sum(x * x, axis=0)
        corr = spearmanr(dgp1.d, rho20).statistic
        wins += corr > 0
    assert wins >= 9
