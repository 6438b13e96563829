import numpy as np
import pytest
from numpy.testing import assert_allclose

from memnet.autocov import AutocovSequence, fignar_acv
from memnet.errors import InsufficientData, ValidationError
from memnet.estimate import FitOptions, FitResult, ModelSpec, fit, param_count, split_theta
from memnet.forecast import (
    evaluate_fixed_origin,
    evaluate_rolling,
    forecast,
    forecast_dlf,
    forecast_ef,
    forecast_rf,
    mspe,
)
from memnet.gnar import GnarOrder, GnarParams
from memnet.simulate import SimConfig, dgp_preset, simulate_preset


def make_result(spec, n, theta, t=100):
    """FitResult wrapper around known parameters (no fitting)."""
    params, d, s2 = split_theta(spec, n, np.asarray(theta, float))
    m = param_count(spec, n)
    return FitResult(spec=spec, n=n, t=t, theta=np.asarray(theta, float),
                     params=params, d=d, sigma2=s2, loglik=0.0, m=m,
                     bic=0.0, aic=0.0, converged=True, iterations=0,
                     n_evals=0, m_trunc=0, wall_time=0.0)


@pytest.fixture(scope="module")
def ar1_result():
    spec = ModelSpec(kind="gnarfi", order=GnarOrder(1, (0,)), graph=None,
                     alpha_mode="global", d_mode="global", sigma_mode="global")
    return make_result(spec, 1, np.array([0.5, 1e-12, 1.0]))


def test_white_noise_forecasts_are_zero(dgp1):
    spec = ModelSpec(kind="gnarfi", order=dgp1.order, graph=dgp1.graph,
                     alpha_mode="global", d_mode="global", sigma_mode="global")
    res = make_result(spec, 5, np.array([0.0, 0.0, 1e-12, 1.0]))
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 5))
    for method in ("DLF", "EF", "RF"):
        pred = forecast(res, x, 3, method=method)
        assert np.max(np.abs(pred.values)) < 1e-6


def test_scalar_ar1_recursion(ar1_result):
    x = np.zeros((30, 1))
    x[-1, 0] = 2.0
    pred = forecast_dlf(ar1_result, x, 2)
    assert_allclose(pred.at(1), [1.0], atol=1e-9)
    assert_allclose(pred.at(2), [0.5], atol=1e-9)
    pred_rf = forecast_rf(ar1_result, x, 2)
    assert_allclose(pred_rf.at(1), [1.0], atol=1e-6)
    assert_allclose(pred_rf.at(2), [0.5], atol=1e-6)


def test_zero_series_forecast_zero(dgp1):
    spec = ModelSpec(kind="fignar", order=dgp1.order, graph=dgp1.graph,
                     alpha_mode="global", d_mode="individual",
                     sigma_mode="individual")
    res = make_result(spec, 5, dgp1.theta())
    x = np.zeros((50, 5))
    for method in ("DLF", "EF", "RF"):
        assert np.max(np.abs(forecast(res, x, 4, method=method).values)) < 1e-12


def test_dlf_ef_agree_at_one_step(dgp1):
    # both are the exact Gaussian conditional mean
    spec = ModelSpec(kind="fignar", order=dgp1.order, graph=dgp1.graph,
                     alpha_mode="global", d_mode="individual",
                     sigma_mode="individual")
    res = make_result(spec, 5, dgp1.theta())
    panel = simulate_preset(dgp1, "fignar", 60, SimConfig(seed=21))
    a = forecast_dlf(res, panel, 1)
    b = forecast_ef(res, panel, 1)
    assert np.max(np.abs(a.values - b.values)) < 1e-6


def test_ef_matches_dense_conditional_mean(small_model):
    spec = ModelSpec(kind="fignar", order=small_model["order"],
                     graph=small_model["graph"], alpha_mode="global",
                     d_mode="individual", sigma_mode="individual")
    theta = np.concatenate([[0.4], [0.25], small_model["d"], small_model["sigma2"]])
    res = make_result(spec, 3, theta)
    rng = np.random.default_rng(1)
    t, h = 32, 2
    x = rng.standard_normal((t, 3))
    pred = forecast_ef(res, x, h)
    acv = fignar_acv(small_model["filters"], small_model["d"],
                     small_model["sigma2"], t + h)
    big = acv.dense(t + h)
    n = 3
    # dense conditional mean: order indices for observed rows under
    # node-major stacking of the extended panel
    obs = np.concatenate([np.arange(i * (t + h), i * (t + h) + t) for i in range(n)])
    fut = np.concatenate([np.arange(i * (t + h) + t, (i + 1) * (t + h)) for i in range(n)])
    s_oo = big[np.ix_(obs, obs)]
    s_fo = big[np.ix_(fut, obs)]
    cond = s_fo @ np.linalg.solve(s_oo, x.T.ravel())
    ref = cond.reshape(n, h).T
    assert np.max(np.abs(pred.values - ref)) < 1e-8


def test_rf_pure_fractional_when_filter_zero():
    spec = ModelSpec(kind="fignar", order=GnarOrder(1, (0,)), graph=None,
                     alpha_mode="global", d_mode="global", sigma_mode="global")
    res = make_result(spec, 1, np.array([0.0, 0.3, 1.0]))
    rng = np.random.default_rng(2)
    x = rng.standard_normal((40, 1))
    pred = forecast_rf(res, x, 1)
    from memnet.fracdiff import frac_coeffs

    pi = frac_coeffs([0.3], 40)[0]
    ref = -np.sum(pi[1:41] * x[::-1, 0][:40])
    assert_allclose(pred.at(1)[0], ref, atol=1e-10)


def test_rf_agrees_with_ef_on_dgp1(dgp1):
    # the truncated power-series predictor loses the unavailable past, so
    # it agrees with the conditional mean at the error level, not pointwise
    spec = ModelSpec(kind="fignar", order=dgp1.order, graph=dgp1.graph,
                     alpha_mode="global", d_mode="individual",
                     sigma_mode="individual")
    res = make_result(spec, 5, dgp1.theta())
    sq_rf, sq_ef = [], []
    for rep in range(30):
        panel = simulate_preset(dgp1, "fignar", 201, SimConfig(seed=2200 + rep))
        train, actual = panel.values[:200], panel.values[200]
        a = forecast_rf(res, train, 1).at(1)
        b = forecast_ef(res, train, 1).at(1)
        sq_rf.append(np.mean((a - actual) ** 2))
        sq_ef.append(np.mean((b - actual) ** 2))
    assert abs(np.mean(sq_rf) - np.mean(sq_ef)) < 0.02


def test_rf_ordering_contract(dgp1):
    # swapping the operator composition changes predictions when the
    # memory differs by node, and not when it is global
    panel = simulate_preset(dgp1, "fignar", 120, SimConfig(seed=23))
    common = dict(order=dgp1.order, graph=dgp1.graph, alpha_mode="global",
                  d_mode="individual", sigma_mode="individual")
    rf_f = forecast_rf(make_result(ModelSpec(kind="fignar", **common), 5,
                                   dgp1.theta()), panel, 1)
    rf_g = forecast_rf(make_result(ModelSpec(kind="gnarfi", **common), 5,
                                   dgp1.theta()), panel, 1)
    assert np.max(np.abs(rf_f.values - rf_g.values)) > 1e-6

    theta_flat = dgp1.theta().copy()
    theta_flat[2:7] = 0.25
    rf_f2 = forecast_rf(make_result(ModelSpec(kind="fignar", **common), 5,
                                    theta_flat), panel, 1)
    rf_g2 = forecast_rf(make_result(ModelSpec(kind="gnarfi", **common), 5,
                                    theta_flat), panel, 1)
    assert np.max(np.abs(rf_f2.values - rf_g2.values)) < 1e-10


def test_rf_companion_for_order_two(dgp1):
    order2 = GnarOrder(2, (1, 0))
    spec = ModelSpec(kind="gnarfi", order=order2, graph=dgp1.graph,
                     alpha_mode="global", d_mode="individual",
                     sigma_mode="individual")
    theta = np.concatenate([[0.3, 0.2], [0.15], dgp1.d, np.ones(5)])
    res = make_result(spec, 5, theta)
    panel = simulate_preset(dgp1, "gnarfi", 150, SimConfig(seed=24))
    pred = forecast_rf(res, panel, 2)
    assert pred.values.shape == (2, 5)
    assert np.all(np.isfinite(pred.values))
    # differencing-first composition has no order-one companion
    spec_f = ModelSpec(kind="fignar", order=order2, graph=dgp1.graph,
                       alpha_mode="global", d_mode="individual",
                       sigma_mode="individual")
    with pytest.raises(ValidationError):
        forecast_rf(make_result(spec_f, 5, theta), panel, 1)


def test_mspe_zero_for_oracle_predictions():
    x = np.random.default_rng(3).standard_normal((4, 5))
    assert mspe(x, x) == 0.0


def test_evaluate_fixed_origin(dgp1):
    spec = ModelSpec(kind="fignar", order=dgp1.order, graph=dgp1.graph,
                     alpha_mode="global", d_mode="individual",
                     sigma_mode="individual")
    panel = simulate_preset(dgp1, "fignar", 130, SimConfig(seed=25))
    res = make_result(spec, 5, dgp1.theta())
    per, used = evaluate_fixed_origin(panel, spec, 120, 2, methods=("EF",),
                                      fitted=res)
    assert per["EF"].shape == (2,)
    assert np.all(per["EF"] > 0)
    with pytest.raises(InsufficientData):
        evaluate_fixed_origin(panel, spec, 130, 2, fitted=res)


def test_evaluate_rolling_refits(dgp1):
    spec = ModelSpec(kind="fignar", order=dgp1.order, graph=dgp1.graph,
                     alpha_mode="global", d_mode="individual",
                     sigma_mode="individual")
    panel = simulate_preset(dgp1, "fignar", 124, SimConfig(seed=26))
    errs = evaluate_rolling(panel, spec, 120, 3, opts=FitOptions(tol=1e-2))
    assert errs.shape == (3,)
    assert np.all(np.isfinite(errs)) and np.all(errs > 0)


@pytest.mark.slow
def test_rolling_band_matches_reported_range(dgp1):
    # per-origin rolling one-step errors around the documented magnitudes
    from memnet.reproduce import HARNESS_OPTS, run_rolling_experiment

    origins = run_rolling_experiment(dgp1, "fignar", "exact", 200, 10, 8, 77000,
                                     opts=HARNESS_OPTS)
    assert origins.shape == (10,)
    assert np.all(origins > 0.6) and np.all(origins < 1.6)
