"""Point forecasting: the prediction-coefficient route (DLF), the
conditional-expectation route (EF), and the explicit power-series
recursion (RF), plus fixed-origin and rolling evaluation.

DLF and EF both realise the Gaussian conditional mean at one step and
agree to solver precision; multi-step DLF keeps the order-T coefficients
and substitutes predictions for unobserved values, while EF conditions on
the observed sample only. RF truncates the autoregressive power-series
representation at the available history.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, ValidationError
from .estimate import FitOptions, FitResult, ModelSpec, fit
from .fracdiff import frac_coeffs
from .toeplitz import BlockToeplitzOperator, durbin_levinson, pcg_solve


@dataclass(frozen=True)
class ForecastResult:
    """Point predictions for horizons 1..h; ``values[g - 1]`` is the
    N-vector for horizon g."""

    method: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or not np.all(np.isfinite(v)):
            raise ValidationError("forecast values must be a finite (h, N) array")
        object.__setattr__(self, "values", v)

    @property
    def horizons(self):
        return self.values.shape[0]

    def at(self, g: int) -> np.ndarray:
        return self.values[g - 1]


def _panel(data) -> np.ndarray:
    return np.asarray(getattr(data, "values", data), dtype=float)


def forecast_dlf(result: FitResult, data, h: int,
                 trunc_tol: float = 1e-12) -> ForecastResult:
    """Prediction-coefficient forecasts.

    The order-T coefficient matrices from the fitted autocovariance give
    the one-step predictor; further steps reuse the same coefficients with
    predictions substituted for unobserved values.
    """
    x = _panel(data)
    t, n = x.shape
    acv = result.acv(t, trunc_tol)
    state = durbin_levinson(acv, t + 1)
    phi = state.phi  # (t, n, n)
    ext = np.vstack([x, np.zeros((h, n))])
    for g in range(h):
        window = ext[g:t + g][::-1]  # X_{T+g}, ..., X_{g+1}
        ext[t + g] = np.einsum("jab,jb->a", phi, window)
    return ForecastResult(method="DLF", values=ext[t:])


def forecast_ef(result: FitResult, data, h: int, pcg_tol: float = 1e-9,
                trunc_tol: float = 1e-12) -> ForecastResult:
    """Conditional-expectation forecasts via one covariance solve.

    X_hat(T+g) = Cov(X_{T+g}, X) Sigma^{-1} X with the solve done by
    preconditioned conjugate gradients.
    """
    x = _panel(data)
    t, n = x.shape
    acv = result.acv(t + h - 1, trunc_tol)
    op = BlockToeplitzOperator(acv, t)
    y, _ = pcg_solve(op, x.T.ravel(), tol=pcg_tol)
    yb = y.reshape(n, t)
    preds = np.empty((h, n))
    for g in range(1, h + 1):
        cov = acv.gammas[g:t + g][::-1]  # lag T+g-u for u = 1..T
        preds[g - 1] = np.einsum("uik,ku->i", cov, yb)
    return ForecastResult(method="EF", values=preds)


def _rf_coefficients(result: FitResult, j_max: int):
    """Power-series AR coefficients C_j, j = 1..j_max, for an order-one
    model: ``A D_{j-1} - D_j`` under differencing-first composition and
    ``D_{j-1} A - D_j`` under noise-first composition."""
    a1 = result.filters()[0]
    n = a1.shape[0]
    pi = frac_coeffs(result.d, j_max)  # (n, j_max + 1)
    d_mats = pi.T[:, :, None] * np.eye(n)[None]  # D_j = diag(pi[:, j])
    if result.spec.kind == "fignar":
        lead = np.einsum("ab,jbc->jac", a1, d_mats[:j_max])  # A D_{j-1}
    else:
        lead = np.einsum("jab,bc->jac", d_mats[:j_max], a1)  # D_{j-1} A
    return lead - d_mats[1:j_max + 1]


def forecast_rf(result: FitResult, data, h: int) -> ForecastResult:
    """Recursive power-series forecasts for order-one models.

    Higher-order noise-first models go through the companion stacking;
    the differencing-first composition does not reduce to an order-one
    companion and is limited to p = 1.
    """
    x = _panel(data)
    t, n = x.shape
    p = result.spec.order.p
    if p == 1:
        coeff = _rf_coefficients(result, t + h - 1)
        ext = np.vstack([x, np.zeros((h, n))])
        for g in range(h):
            window = ext[:t + g][::-1]  # X_{T+g}, ..., X_1
            ext[t + g] = np.einsum("jab,jb->a", coeff[:t + g], window)
        return ForecastResult(method="RF", values=ext[t:])
    if result.spec.kind != "gnarfi":
        raise ValidationError("power-series forecasts need p = 1 for the "
                              "differencing-first composition")
    # companion stacking: state (X_t, ..., X_{t-p+1}) is order one
    from .autocov import companion_reduce

    mats, d_pad = companion_reduce(result.filters(), result.d)
    a1 = mats[0]
    m = a1.shape[0]
    states = np.stack([np.concatenate([x[u - j] for j in range(p)])
                       for u in range(p - 1, t)])
    pi = frac_coeffs(d_pad, t - p + h)
    d_mats = pi.T[:, :, None] * np.eye(m)[None]
    j_max = states.shape[0] + h - 1
    lead = np.einsum("jab,bc->jac", d_mats[:j_max], a1)
    coeff = lead - d_mats[1:j_max + 1]
    ext = np.vstack([states, np.zeros((h, m))])
    base = states.shape[0]
    for g in range(h):
        window = ext[:base + g][::-1]
        ext[base + g] = np.einsum("jab,jb->a", coeff[:base + g], window)
    return ForecastResult(method="RF", values=ext[base:, :n])


_METHODS = {"DLF": forecast_dlf, "EF": forecast_ef, "RF": forecast_rf}


def forecast(result: FitResult, data, h: int, method: str = "EF") -> ForecastResult:
    try:
        fn = _METHODS[method.upper()]
    except KeyError:
        raise ValidationError(f"unknown forecast method {method!r}") from None
    return fn(result, data, h)


def mspe(predictions: np.ndarray, actuals: np.ndarray) -> float:
    """Mean squared prediction error with equal node weights."""
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if predictions.shape != actuals.shape:
        raise ValidationError("prediction/actual shapes differ")
    return float(np.mean((predictions - actuals) ** 2))


def evaluate_fixed_origin(data, spec: ModelSpec, t_fit: int, h: int,
                          methods=("DLF", "EF", "RF"), opts: FitOptions = None,
                          fitted: FitResult = None):
    """Fit on the first ``t_fit`` observations, forecast ``h`` steps, and
    score each requested method per horizon.

    Returns ``(per_method, fit_result)`` where ``per_method[m]`` is the
    (h,) array of per-horizon mean squared errors across nodes.
    """
    x = _panel(data)
    if x.shape[0] < t_fit + h:
        raise InsufficientData(f"need {t_fit + h} rows, have {x.shape[0]}")
    train, future = x[:t_fit], x[t_fit:t_fit + h]
    result = fitted if fitted is not None else fit(spec, train, opts=opts)
    per_method = {}
    for m in methods:
        pred = forecast(result, train, h, method=m)
        per_method[m] = np.mean((pred.values - future) ** 2, axis=1)
    return per_method, result


def evaluate_rolling(data, spec: ModelSpec, t0: int, n_origins: int,
                     method: str = "EF", opts: FitOptions = None,
                     refit: bool = True):
    """One-step rolling forecasts with a refit at every origin.

    Later refits start from the previous origin's estimate, which keeps
    the per-origin cost low without changing the estimator. Returns the
    (n_origins,) array of per-origin mean squared errors across nodes.
    """
    x = _panel(data)
    if x.shape[0] < t0 + n_origins:
        raise InsufficientData(f"need {t0 + n_origins} rows, have {x.shape[0]}")
    errors = np.empty(n_origins)
    prev_theta = None
    result = None
    for k in range(n_origins):
        train = x[:t0 + k]
        if refit or result is None:
            result = fit(spec, train, init=prev_theta, opts=opts)
            prev_theta = result.theta
        pred = forecast(result, train, 1, method=method)
        errors[k] = float(np.mean((pred.at(1) - x[t0 + k]) ** 2))
    return errors
