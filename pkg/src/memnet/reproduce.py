"""Reproduction harness for the published simulation tables.

Each table function simulates replicates, fits models, and returns a long
data frame with the computed cell values side by side with the published
reference values (stored below as fixtures). ``desk`` scale uses few
replicates so a table finishes on a laptop; ``full`` matches the
published replicate counts.

All experiments are deterministic: replicate r of a table cell uses seed
``base + r`` with the base fixed per table.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .errors import UnknownTable
from .estimate import FitOptions, ModelSpec, fit
from .forecast import evaluate_rolling, forecast, mspe
from .gnar import GnarOrder
from .select import DiscoveryConfig, discover_graph
from .simulate import SimConfig, dgp_preset, simulate_preset

TABLES = ("T1", "T2", "T3", "T4", "T5", "T6", "T7", "C1", "C2")

# fit options used by all table runs: the BFGS stops once the gradient is
# below statistical relevance, which costs a fraction of the default
HARNESS_OPTS = FitOptions(tol=1e-2)

# published values, transcribed from the source tables
REFERENCE = {
    # AMSE x 1e3, differencing-first model: (T, column) -> value
    "T1": {(200, "DGP1"): 8.415, (200, "DGP2-gl.d"): 7.898, (200, "DGP2-ind.d"): 7.911,
           (200, "DGP3-gl.s2"): 12.386, (200, "DGP3-ind.s2"): 16.940,
           (500, "DGP1"): 3.842, (500, "DGP2-gl.d"): 3.355, (500, "DGP2-ind.d"): 3.248,
           (500, "DGP3-gl.s2"): 6.629, (500, "DGP3-ind.s2"): 9.821,
           (1000, "DGP1"): 2.524, (1000, "DGP2-gl.d"): 2.027, (1000, "DGP2-ind.d"): 1.890,
           (1000, "DGP3-gl.s2"): 4.977, (1000, "DGP3-ind.s2"): 7.588},
    # AMSE x 1e3, noise-first model: (method, T, column) -> value
    "T2": {("standard", 200, "DGP1"): 8.743, ("standard", 500, "DGP1"): 3.590,
           ("standard", 1000, "DGP1"): 2.213,
           ("conditional", 200, "DGP1"): 9.416, ("conditional", 500, "DGP1"): 3.570,
           ("conditional", 1000, "DGP1"): 1.931,
           ("standard", 200, "DGP2-gl.d"): 7.791, ("standard", 200, "DGP2-ind.d"): 7.913,
           ("standard", 200, "DGP3-gl.s2"): 12.162, ("standard", 200, "DGP3-ind.s2"): 18.936,
           ("conditional", 200, "DGP2-gl.d"): 7.660, ("conditional", 200, "DGP2-ind.d"): 8.350,
           ("conditional", 200, "DGP3-gl.s2"): 8.034, ("conditional", 200, "DGP3-ind.s2"): 10.425},
    # AMSE x 1e3 on the ten-node network: (model, method, T, dgp) -> value
    "T3": {("fignar", "standard", 200, "DGP1"): 9.115,
           ("fignar", "standard", 500, "DGP1"): 3.399,
           ("fignar", "standard", 1000, "DGP1"): 2.189,
           ("gnarfi", "standard", 200, "DGP1"): 9.047,
           ("gnarfi", "conditional", 200, "DGP1"): 9.225,
           ("fignar", "standard", 200, "DGP2"): 7.962,
           ("fignar", "standard", 200, "DGP3"): 21.565},
    # one-step MSPE: (row, predictor) -> value
    "T4": {("fignar-200", "DLF"): 0.911, ("fignar-200", "EF"): 0.911, ("fignar-200", "RF"): 0.912,
           ("fignar-500", "DLF"): 1.044, ("fignar-500", "EF"): 1.046, ("fignar-500", "RF"): 1.046,
           ("fignar-1000", "DLF"): 0.935, ("fignar-1000", "EF"): 0.937, ("fignar-1000", "RF"): 0.937,
           ("gnarfi-std-200", "DLF"): 0.870, ("gnarfi-std-200", "EF"): 0.870, ("gnarfi-std-200", "RF"): 0.872,
           ("gnarfi-cond-200", "DLF"): 0.875, ("gnarfi-cond-200", "EF"): 0.875, ("gnarfi-cond-200", "RF"): 0.877},
    # rolling one-step MSPE at origins 201..210
    "T5": {"fignar": [0.911, 1.167, 1.002, 1.016, 1.090, 0.908, 0.931, 0.918, 1.037, 1.162],
           "gnarfi-std": [0.870, 0.910, 0.968, 1.029, 0.983, 0.994, 1.040, 0.966, 0.930, 1.115],
           "gnarfi-cond": [0.875, 0.908, 0.974, 1.026, 0.987, 0.985, 1.042, 0.966, 0.929, 1.120]},
    # h-step MSPE, h = 1..10 (conditional-expectation predictor)
    "T6": {"fignar": [0.911, 1.489, 1.603, 1.638, 1.715, 1.759, 1.814, 1.865, 2.019, 1.946],
           "gnarfi-std": [0.870, 1.274, 1.543, 1.777, 1.803, 2.064, 2.142, 2.035, 2.098, 2.083],
           "gnarfi-cond": [0.875, 1.278, 1.547, 1.779, 1.814, 2.071, 2.156, 2.040, 2.094, 2.081]},
    # unknown-network one-step MSPE, differencing-first column
    "T7": {("(1,[0])", "none"): 8.972, ("(1,[1])", "fully_connected"): 8.376,
           ("(1,[1])", "gnar_inf_approx"): 8.146},
    # selection win counts over 100 replicates (correct-model columns)
    "C1": {("fignar-data", "bic", "(1,[1])"): 48, ("fignar-data", "aic", "(1,[1])"): 30},
    "C2": {("bic", "(1,[0])"): 14, ("bic", "(1,[1])"): 80, ("bic", "(1,[2])"): 1,
           ("bic", "(2,[0,0])"): 0, ("bic", "(2,[1,0])"): 1, ("bic", "(2,[1,1])"): 2,
           ("aic", "(1,[0])"): 0, ("aic", "(1,[1])"): 34, ("aic", "(1,[2])"): 7,
           ("aic", "(2,[0,0])"): 0, ("aic", "(2,[1,0])"): 7, ("aic", "(2,[1,1])"): 13},
}

SIX_ORDERS = (
    (1, (0,)), (1, (1,)), (1, (2,)),
    (2, (0, 0)), (2, (1, 0)), (2, (1, 1)),
)


def order_label(p, s):
    return f"({p},[{','.join(str(v) for v in s)}])"


def spec_for_preset(preset, kind: str, estimation: str = "exact",
                    order: GnarOrder = None) -> ModelSpec:
    return ModelSpec(kind=kind, order=order or preset.order, graph=preset.graph,
                     estimation=estimation, alpha_mode=preset.alpha_mode,
                     d_mode=preset.d_mode, sigma_mode=preset.sigma_mode)


def sim_cfg(seed: int) -> SimConfig:
    return SimConfig(seed=seed, filter_order=20000)


def run_amse(preset, kind: str, estimation: str, t: int, k: int, seed_base: int,
             opts: FitOptions = None, d_mode=None, sigma_mode=None):
    """Average mean squared parameter error over k replicates.

    Returns ``(amse, n_nonconverged)``; the average runs over all
    replicates and parameters (non-converged fits included, mirroring how
    the reference experiments aggregate)."""
    opts = opts or HARNESS_OPTS
    spec = spec_for_preset(preset, kind, estimation)
    if d_mode or sigma_mode:
        from dataclasses import replace
        spec = replace(spec, d_mode=d_mode or spec.d_mode,
                       sigma_mode=sigma_mode or spec.sigma_mode)
    truth = preset.theta()
    if d_mode == "global" and preset.d_mode == "individual":
        raise ValueError("global-d fit against an individual-d preset has no "
                         "matching true vector")
    errs, bad = [], 0
    for r in range(k):
        x = simulate_preset(preset, kind, t, sim_cfg(seed_base + r))
        res = fit(spec, x, opts=opts)
        if not res.converged:
            bad += 1
        errs.append(np.mean((res.theta - truth) ** 2))
    return float(np.mean(errs)), bad


def run_forecast_experiment(preset, kind: str, estimation: str, t: int, k: int,
                            seed_base: int, h: int = 1,
                            methods=("DLF", "EF", "RF"), opts: FitOptions = None):
    """MSPE per (method, horizon) plus the non-convergence count.

    Each replicate simulates t + h points, fits on the first t, and scores
    every method's horizon-g prediction against the held-out truth."""
    opts = opts or HARNESS_OPTS
    spec = spec_for_preset(preset, kind, estimation)
    sq = {m: np.zeros((k, h)) for m in methods}
    bad = 0
    for r in range(k):
        panel = simulate_preset(preset, kind, t + h, sim_cfg(seed_base + r))
        train, future = panel.values[:t], panel.values[t:]
        res = fit(spec, train, opts=opts)
        if not res.converged:
            bad += 1
        for m in methods:
            pred = forecast(res, train, h, method=m)
            sq[m][r] = np.mean((pred.values - future) ** 2, axis=1)
    return {m: sq[m].mean(axis=0) for m in methods}, bad


def run_rolling_experiment(preset, kind: str, estimation: str, t0: int,
                           n_origins: int, k: int, seed_base: int,
                           opts: FitOptions = None):
    """Per-origin rolling one-step MSPEs averaged over replicates."""
    opts = opts or HARNESS_OPTS
    spec = spec_for_preset(preset, kind, estimation)
    per = np.zeros((k, n_origins))
    for r in range(k):
        panel = simulate_preset(preset, kind, t0 + n_origins, sim_cfg(seed_base + r))
        per[r] = evaluate_rolling(panel.values, spec, t0, n_origins,
                                  method="EF", opts=opts)
    return per.mean(axis=0)


def run_order_selection(preset, data_kind: str, fit_kind: str, estimation: str,
                        t: int, k: int, seed_base: int, opts: FitOptions = None):
    """Win counts per order for both criteria over the six-order grid.

    Non-converged fits never win; replicates where nothing converged count
    for no order."""
    opts = opts or HARNESS_OPTS
    wins = {"bic": {order_label(p, s): 0 for p, s in SIX_ORDERS},
            "aic": {order_label(p, s): 0 for p, s in SIX_ORDERS}}
    for r in range(k):
        panel = simulate_preset(preset, data_kind, t, sim_cfg(seed_base + r))
        rows = []
        for p, s in SIX_ORDERS:
            order = GnarOrder(p=p, s=s)
            spec = ModelSpec(kind=fit_kind, order=order, graph=preset.graph,
                             estimation=estimation, alpha_mode="global",
                             d_mode=preset.d_mode, sigma_mode=preset.sigma_mode)
            try:
                res = fit(spec, panel, opts=opts)
            except Exception:  # noqa: BLE001 - candidate failure, skip
                continue
            if res.converged:
                rows.append((order_label(p, s), res.bic, res.aic))
        if rows:
            wins["bic"][min(rows, key=lambda r_: r_[1])[0]] += 1
            wins["aic"][min(rows, key=lambda r_: r_[2])[0]] += 1
    return wins


# dense five-dimensional long-memory generator for the unknown-network
# experiment: a full AR matrix and correlated innovations, frozen here
_DENSE_A1 = np.array([
    [0.25, 0.10, -0.08, 0.05, 0.07],
    [0.12, 0.20, 0.10, -0.06, 0.04],
    [-0.05, 0.08, 0.30, 0.09, -0.07],
    [0.06, -0.04, 0.11, 0.22, 0.08],
    [0.09, 0.05, -0.06, 0.10, 0.28],
])
_DENSE_CORR = 0.4
_DENSE_D = np.array([0.05, 0.15, 0.25, 0.35, 0.45])


def simulate_dense_longmem(t: int, seed: int, burn_in: int = 5000,
                           filter_order: int = 20000) -> np.ndarray:
    """Draw from X_t = A1 X_{t-1} + Z_t with Z componentwise fractionally
    integrated correlated noise (full covariance)."""
    from .fracdiff import frac_integ_coeffs
    from scipy.fft import next_fast_len

    rng = np.random.Generator(np.random.PCG64(seed))
    n = _DENSE_A1.shape[0]
    cov = np.full((n, n), _DENSE_CORR) + (1.0 - _DENSE_CORR) * np.eye(n)
    chol = np.linalg.cholesky(cov)
    lead = burn_in + filter_order
    eps = rng.standard_normal((lead + t, n)) @ chol.T
    psi = frac_integ_coeffs(_DENSE_D, filter_order)
    n_fft = next_fast_len(lead + t + filter_order, real=True)
    z = np.fft.irfft(np.fft.rfft(eps, n=n_fft, axis=0)
                     * np.fft.rfft(psi.T, n=n_fft, axis=0), n=n_fft, axis=0)[:lead + t]
    x = z
    a_t = _DENSE_A1.T.copy()
    for s_ in range(1, x.shape[0]):
        x[s_] += x[s_ - 1] @ a_t
    return x[lead:]


def run_unknown_graph_experiment(k: int, seed_base: int, t: int = 200,
                                 holdout: int = 1, opts: FitOptions = None,
                                 strategies=("none", "fully_connected",
                                             "gnar_inf_approx")):
    """One-step MSPEs of network fits on dense long-memory data.

    Returns ``{strategy: mspe}`` for the differencing-first model with
    individual parameters, fitted either without a graph (order (1,[0]))
    or on the named discovered graph (order (1,[1]))."""
    opts = opts or HARNESS_OPTS
    errs = {s: [] for s in strategies}
    for r in range(k):
        x = simulate_dense_longmem(t + holdout, seed_base + r)
        train, future = x[:t], x[t:t + holdout]
        for strat in strategies:
            if strat == "none":
                order = GnarOrder(p=1, s=(0,))
                graph = None
            else:
                order = GnarOrder(p=1, s=(1,))
                graph = discover_graph(train, strat,
                                       config=DiscoveryConfig(seed=seed_base + r))
            spec = ModelSpec(kind="fignar", order=order, graph=graph,
                             alpha_mode="individual", d_mode="individual",
                             sigma_mode="individual")
            res = fit(spec, train, opts=opts)
            pred = forecast(res, train, holdout, method="EF")
            errs[strat].append(float(np.mean((pred.values - future) ** 2)))
    return {s: float(np.mean(v)) for s, v in errs.items()}


# -- table assembly -------------------------------------------------------

def _frame(rows, columns):
    return pd.DataFrame(rows, columns=columns)


def reproduce_table(table: str, scale: str = "desk", seed: int = 20240) -> pd.DataFrame:
    """Compute one published table (or its desk-scale subset) and attach
    the reference values."""
    table = table.upper()
    if table not in TABLES:
        raise UnknownTable(f"unknown table {table!r}; choose from {TABLES}")
    if scale not in ("desk", "full"):
        raise UnknownTable(f"scale must be desk or full, got {scale!r}")
    full = scale == "full"

    if table == "T1":
        k = 100 if full else 20
        cells = [(t, "DGP1", "DGP1", {}) for t in (200, 500, 1000)]
        if full:
            cells += [(t, f"DGP2-{m}", "DGP2", {"d_mode": mode})
                      for t in (200, 500, 1000)
                      for m, mode in (("gl.d", "global"), ("ind.d", "individual"))]
            cells += [(t, f"DGP3-{m}", "DGP3", {"sigma_mode": mode})
                      for t in (200, 500, 1000)
                      for m, mode in (("gl.s2", "global"), ("ind.s2", "individual"))]
        else:
            cells = [(200, "DGP1", "DGP1", {}), (1000, "DGP1", "DGP1", {})]
        rows = []
        for t, col, dgp, modes in cells:
            preset = dgp_preset(dgp)
            amse, bad = run_amse(preset, "fignar", "exact", t, k, seed, **modes)
            rows.append((t, col, k, amse * 1e3, REFERENCE["T1"].get((t, col)), bad))
        return _frame(rows, ["T", "column", "replicates", "computed", "reference",
                             "nonconverged"])

    if table == "T2":
        k = 100 if full else 8
        ts = (200, 500, 1000) if full else (200,)
        rows = []
        for method in ("standard", "conditional"):
            est = "exact" if method == "standard" else "conditional"
            for t in ts:
                preset = dgp_preset("DGP1")
                amse, bad = run_amse(preset, "gnarfi", est, t, k, seed + 50)
                rows.append((method, t, "DGP1", k, amse * 1e3,
                             REFERENCE["T2"].get((method, t, "DGP1")), bad))
        return _frame(rows, ["method", "T", "column", "replicates", "computed",
                             "reference", "nonconverged"])

    if table == "T3":
        k = 50 if full else 3
        ts = (200, 500, 1000) if full else (200,)
        rows = []
        combos = [("fignar", "standard")]
        if full:
            combos += [("gnarfi", "standard"), ("gnarfi", "conditional")]
        for kind, method in combos:
            est = "exact" if method == "standard" else "conditional"
            for t in ts:
                preset = dgp_preset("DGP1", "tennet")
                amse, bad = run_amse(preset, kind, est, t, k, seed + 100)
                rows.append((kind, method, t, "DGP1", k, amse * 1e3,
                             REFERENCE["T3"].get((kind, method, t, "DGP1")), bad))
        return _frame(rows, ["model", "method", "T", "column", "replicates",
                             "computed", "reference", "nonconverged"])

    if table == "T4":
        k = 100 if full else 20
        rows = []
        runs = [("fignar", "exact", 200)]
        if full:
            runs += [("fignar", "exact", 500), ("fignar", "exact", 1000),
                     ("gnarfi", "exact", 200), ("gnarfi", "conditional", 200)]
        for kind, est, t in runs:
            label = {("fignar", "exact"): f"fignar-{t}",
                     ("gnarfi", "exact"): f"gnarfi-std-{t}",
                     ("gnarfi", "conditional"): f"gnarfi-cond-{t}"}[(kind, est)]
            per, bad = run_forecast_experiment(dgp_preset("DGP1"), kind, est, t, k,
                                               seed + 200)
            for m, vals in per.items():
                rows.append((label, m, k, float(vals[0]),
                             REFERENCE["T4"].get((label, m)), bad))
        return _frame(rows, ["row", "method", "replicates", "computed",
                             "reference", "nonconverged"])

    if table == "T5":
        k = 100 if full else 8
        origins = run_rolling_experiment(dgp_preset("DGP1"), "fignar", "exact",
                                         200, 10, k, seed + 300)
        ref = REFERENCE["T5"]["fignar"]
        rows = [(201 + i, k, float(origins[i]), ref[i]) for i in range(10)]
        return _frame(rows, ["origin", "replicates", "computed", "reference"])

    if table == "T6":
        k = 100 if full else 20
        per, bad = run_forecast_experiment(dgp_preset("DGP1"), "fignar", "exact",
                                           200, k, seed + 400, h=10, methods=("EF",))
        ref = REFERENCE["T6"]["fignar"]
        rows = [(h + 1, k, float(per["EF"][h]), ref[h], bad) for h in range(10)]
        return _frame(rows, ["horizon", "replicates", "computed", "reference",
                             "nonconverged"])

    if table == "T7":
        k = 50 if full else 10
        errs = run_unknown_graph_experiment(k, seed + 500)
        label = {"none": ("(1,[0])", "none"),
                 "fully_connected": ("(1,[1])", "fully_connected"),
                 "gnar_inf_approx": ("(1,[1])", "gnar_inf_approx")}
        rows = [(label[s][0], label[s][1], k, v * 1e3,
                 REFERENCE["T7"].get(label[s])) for s, v in errs.items()]
        return _frame(rows, ["order", "graph", "replicates", "computed_x1e3",
                             "reference_x1e3"])

    if table == "C1":
        k = 100 if full else 8
        wins = run_order_selection(dgp_preset("DGP1"), "fignar", "fignar", "exact",
                                   200, k, seed + 600)
        rows = []
        for crit in ("bic", "aic"):
            for lab, cnt in wins[crit].items():
                ref = REFERENCE["C1"].get(("fignar-data", crit, lab))
                rows.append((crit, lab, k, cnt, ref))
        return _frame(rows, ["criterion", "order", "replicates", "computed",
                             "reference_of_100"])

    # C2: order selection with the correct model fixed
    k = 100 if full else 20
    wins = run_order_selection(dgp_preset("DGP1"), "fignar", "fignar", "exact",
                               200, k, seed + 700)
    rows = []
    for crit in ("bic", "aic"):
        for lab, cnt in wins[crit].items():
            rows.append((crit, lab, k, cnt, REFERENCE["C2"].get((crit, lab))))
    return _frame(rows, ["criterion", "order", "replicates", "computed",
                         "reference_of_100"])
