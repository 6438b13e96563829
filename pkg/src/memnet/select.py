"""Order/model selection by information criteria and graph discovery for
the unknown-network case.

Grid search fits every candidate and ranks converged fits by the chosen
criterion; candidates that did not converge are reported with a flag and
never win. Graph discovery either takes the complete graph, builds a
spanning tree from coordinates, or scores short-memory high-order network
fits on random graphs by holdout prediction error.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import AllCandidatesFailed, MissingCoordinates, ValidationError
from .estimate import FitOptions, FitResult, ModelSpec, fit
from .gnar import GnarOrder, gnar_ls_fit
from .network import Graph, fully_connected, graph_from_edges, mst_from_coords


def information_criteria(loglik: float, m: int, t: int):
    """(BIC, AIC) from a maximised log-likelihood with m parameters."""
    return (-2.0 * loglik + m * np.log(t), -2.0 * loglik + 2.0 * m)


@dataclass(frozen=True)
class CandidateReport:
    """One grid-search row."""

    spec: ModelSpec
    fit: FitResult
    bic: float
    aic: float
    converged: bool
    mspe: float = None
    error: str = None


@dataclass(frozen=True)
class SelectionReport:
    """All candidate rows plus rankings by each criterion (converged
    candidates only; non-converged rows keep their flag and are never
    ranked as winners)."""

    rows: tuple
    criterion: str

    def ranked(self, criterion: str = None):
        crit = criterion or self.criterion
        ok = [r for r in self.rows if r.converged and r.error is None]
        key = {"bic": lambda r: r.bic, "aic": lambda r: r.aic,
               "mspe": lambda r: (np.inf if r.mspe is None else r.mspe)}[crit]
        return sorted(ok, key=key)

    @property
    def winner(self) -> CandidateReport:
        ranked = self.ranked()
        if not ranked:
            raise AllCandidatesFailed("no converged candidate")
        return ranked[0]

    def lines(self):
        out = ["candidate,converged,loglik,bic,aic,mspe"]
        for r in self.rows:
            ll = "" if r.fit is None else f"{r.fit.loglik:.6f}"
            ms = "" if r.mspe is None else f"{r.mspe:.6f}"
            flag = "yes" if r.converged else "no"
            err = f" [{r.error}]" if r.error else ""
            out.append(f"{r.spec.describe()}{err},{flag},{ll},"
                       f"{'' if r.fit is None else f'{r.bic:.6f}'},"
                       f"{'' if r.fit is None else f'{r.aic:.6f}'},{ms}")
        return out


def grid_search(data, candidates, criterion: str = "bic",
                opts: FitOptions = None, holdout: int = 0) -> SelectionReport:
    """Fit every candidate spec and rank by ``bic``/``aic``/``mspe``.

    The ``mspe`` criterion holds out the last ``holdout`` observations and
    scores one-step conditional-expectation forecasts over them.
    """
    if criterion not in ("bic", "aic", "mspe"):
        raise ValidationError(f"unknown criterion {criterion!r}")
    if criterion == "mspe" and holdout < 1:
        raise ValidationError("mspe criterion needs a positive holdout")
    x = np.asarray(getattr(data, "values", data), dtype=float)
    rows = []
    for spec in candidates:
        try:
            train = x[:-holdout] if holdout else x
            res = fit(spec, train, opts=opts)
            ms = None
            if holdout:
                from .forecast import forecast

                errs = []
                for k in range(holdout):
                    ctx = x[:x.shape[0] - holdout + k]
                    pred = forecast(res, ctx, 1, method="EF")
                    errs.append(np.mean((pred.at(1) - x[x.shape[0] - holdout + k]) ** 2))
                ms = float(np.mean(errs))
            rows.append(CandidateReport(spec=spec, fit=res, bic=res.bic, aic=res.aic,
                                        converged=res.converged, mspe=ms))
        except Exception as exc:  # noqa: BLE001 - candidate failures are data
            rows.append(CandidateReport(spec=spec, fit=None, bic=np.inf, aic=np.inf,
                                        converged=False, error=type(exc).__name__))
    report = SelectionReport(rows=tuple(rows), criterion=criterion)
    report.winner  # raises AllCandidatesFailed when empty
    return report


def random_graph(n: int, edge_prob: float, rng) -> Graph:
    """Erdos-Renyi draw (isolated nodes allowed; neighbour stages of an
    isolated node are simply empty)."""
    edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)
             if rng.random() < edge_prob]
    return graph_from_edges(n, edges)


@dataclass(frozen=True)
class DiscoveryConfig:
    """Controls for the random-graph holdout search."""

    num_random_graphs: int = 50
    edge_probs: tuple = (0.2, 0.4, 0.6)
    p_high: int = 10
    holdout: int = 20
    alpha_mode: str = "global"
    seed: int = 0


def _ls_one_step_mspe(data, graph: Graph, order: GnarOrder, alpha_mode: str,
                      holdout: int) -> float:
    """Least-squares network fit on the head of the panel, one-step errors
    over the holdout tail."""
    x = np.asarray(getattr(data, "values", data), dtype=float)
    t = x.shape[0]
    params, _ = gnar_ls_fit(x[:t - holdout], graph, order, alpha_mode)
    from .estimate import conditional_residuals
    from .network import build_neighbour_stages, compute_weights

    w = None
    if order.max_stage >= 1:
        ns = build_neighbour_stages(graph, order.max_stage)
        w = compute_weights(ns, "equal", graph, num_covariates=order.C)
    # z_t = x_t - prediction, so one-step errors are the filtered series
    z = conditional_residuals(params, order, x, w)
    return float(np.mean(z[t - holdout:] ** 2))


def discover_graph(data, strategy: str, coords=None,
                   config: DiscoveryConfig = None, metric: str = "euclidean") -> Graph:
    """Produce a graph for models when none is given.

    ``fully_connected`` links everything; ``mst`` spans the coordinates;
    ``gnar_inf_approx`` scores a high-order short-memory network fit on
    seeded random graphs by one-step holdout error and returns the argmin
    (the high order stands in for slowly decaying dependence; the order
    itself is fixed, never selected, because the holdout error keeps
    improving as the order grows).
    """
    x = np.asarray(getattr(data, "values", data), dtype=float)
    n = x.shape[1]
    if strategy == "fully_connected":
        return fully_connected(n)
    if strategy == "mst":
        if coords is None:
            raise MissingCoordinates("mst strategy needs node coordinates")
        return mst_from_coords(coords, metric=metric)
    if strategy != "gnar_inf_approx":
        raise ValidationError(f"unknown strategy {strategy!r}")

    cfg = config or DiscoveryConfig()
    if x.shape[0] <= cfg.p_high + cfg.holdout + n * cfg.p_high + cfg.p_high:
        raise ValidationError("series too short for the high-order search")
    rng = np.random.default_rng(cfg.seed)
    order = GnarOrder(p=cfg.p_high, s=(1,) * cfg.p_high)
    best, best_err = None, np.inf
    for k in range(cfg.num_random_graphs):
        g = random_graph(n, cfg.edge_probs[k % len(cfg.edge_probs)], rng)
        if g.num_edges == 0:
            continue
        try:
            err = _ls_one_step_mspe(x, g, order, cfg.alpha_mode, cfg.holdout)
        except Exception:  # noqa: BLE001 - unusable draw, skip
            continue
        if err < best_err:
            best, best_err = g, err
    if best is None:
        raise AllCandidatesFailed("no usable random graph")
    return best
