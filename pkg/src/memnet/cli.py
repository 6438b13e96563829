"""Command-line surface.

Subcommands: ``simulate | fit | forecast | select | graph | acv |
reproduce``. Every command resolves its configuration (defaults <- config
file <- flags), writes the outputs plus a ``resolved_config.ini`` echo
sufficient to re-run bit-identically, and renders companion figures next
to the delimited files unless figures are disabled.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plots
from .config import CONFIG_SCHEMA, load_config, parse_stages, write_resolved
from .errors import NumericalError, ValidationError
from .estimate import FitOptions, ModelSpec, fit
from .forecast import forecast
from .gnar import GnarOrder
from .ingest import ingest_series, write_series
from .network import (
    fully_connected,
    mst_from_coords,
    read_coords_file,
    read_graph_file,
    write_graph_file,
)
from .select import DiscoveryConfig, discover_graph, grid_search
from .simulate import (
    PRNG_NAME,
    SimConfig,
    dgp_preset,
    load_fixture_graph,
    simulate_preset,
)


def _outdir(cfg) -> Path:
    path = Path(cfg["output"]["directory"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_graph(cfg, data=None):
    src = cfg["graph"]["source"]
    strategy = cfg["graph"]["strategy"]
    if src:
        if src.lower() in ("fivenet", "tennet"):
            return load_fixture_graph(src)
        return read_graph_file(src)
    if strategy:
        coords = None
        if cfg["graph"]["coords"]:
            coords = read_coords_file(cfg["graph"]["coords"])
        if strategy == "mst":
            return mst_from_coords(coords, metric=cfg["graph"]["metric"])
        if strategy == "fully_connected":
            if data is None:
                raise ValidationError("fully_connected needs data to size the graph")
            return fully_connected(data.values.shape[1])
        return discover_graph(data.values, strategy, coords=coords,
                              config=DiscoveryConfig(seed=cfg["simulate"]["seed"]))
    return None


def _model_spec(cfg, graph) -> ModelSpec:
    m = cfg["model"]
    order = GnarOrder(p=m["p"], s=parse_stages(m["s"], m["p"]), C=m["covariates"])
    return ModelSpec(kind=m["kind"], order=order, graph=graph,
                     estimation=m["estimation"], alpha_mode=m["alpha_mode"],
                     d_mode=m["d_mode"], sigma_mode=m["sigma_mode"],
                     scheme=m["weight_scheme"])


def _fit_options(cfg) -> FitOptions:
    o = cfg["optimizer"]
    return FitOptions(tol=o["tol"], max_iter=o["max_iter"],
                      det_method=o["det_method"], pcg_tol=o["pcg_tol"],
                      trunc_tol=o["trunc_tol"])


def _echo(cfg, outdir: Path):
    write_resolved(cfg, outdir / "resolved_config.ini")


def cmd_simulate(cfg, args):
    out = _outdir(cfg)
    sim = cfg["simulate"]
    scfg = SimConfig(method=sim["method"], burn_in=sim["burn_in"],
                     filter_order=sim["filter_order"], seed=sim["seed"])
    if not sim["preset"]:
        raise ValidationError("simulate needs a preset (dgp1/dgp2/dgp3); custom "
                              "parameter simulation is available through the API")
    graph_name = cfg["graph"]["source"] or "fivenet"
    preset = dgp_preset(sim["preset"], graph_name)
    panel = simulate_preset(preset, cfg["model"]["kind"], sim["t"], scfg)
    write_series(panel, out / "series.csv")
    meta = {
        "preset": preset.name, "graph": preset.graph_name,
        "kind": cfg["model"]["kind"], "t": sim["t"], "seed": sim["seed"],
        "method": sim["method"], "burn_in": sim["burn_in"],
        "filter_order": sim["filter_order"], "prng": PRNG_NAME,
        "d": [float(v) for v in preset.d],
        "sigma2": [float(v) for v in preset.sigma2],
    }
    (out / "series_meta.json").write_text(json.dumps(meta, indent=2))
    if cfg["output"]["figures"]:
        plots.save_panel_figure(panel, out / "series.png",
                                title=f"{preset.name} {cfg['model']['kind']}")
    _echo(cfg, out)
    print(f"wrote {out / 'series.csv'} ({sim['t']} x {panel.n})")
    return 0


def _load_panel(cfg, args):
    if not getattr(args, "data", None):
        raise ValidationError("this command needs --data <series.csv>")
    return ingest_series(args.data, policy=getattr(args, "policy", "strict"),
                         demean=getattr(args, "demean", False),
                         log_transform=getattr(args, "log", False))


def cmd_fit(cfg, args):
    out = _outdir(cfg)
    panel = _load_panel(cfg, args)
    graph = _resolve_graph(cfg, panel)
    spec = _model_spec(cfg, graph)
    result = fit(spec, panel, opts=_fit_options(cfg))
    report = "\n".join(result.report_lines()) + "\n"
    (out / "fit_report.txt").write_text(report)
    _echo(cfg, out)
    sys.stdout.write(report)
    return 0


def cmd_forecast(cfg, args):
    import pandas as pd

    out = _outdir(cfg)
    panel = _load_panel(cfg, args)
    graph = _resolve_graph(cfg, panel)
    spec = _model_spec(cfg, graph)
    h = args.horizon
    holdout = args.holdout
    if holdout and panel.t <= holdout + spec.order.p + 1:
        raise ValidationError("holdout leaves too little data to fit on")
    train = panel.values[:panel.t - holdout] if holdout else panel.values
    actuals = panel.values[panel.t - holdout:] if holdout else None
    result = fit(spec, train, opts=_fit_options(cfg))
    rows = []
    preds = {}
    mspe_lines = []
    for method in args.methods.split(","):
        fc = forecast(result, train, h, method=method.strip())
        preds[fc.method] = fc
        for g in range(1, h + 1):
            for i, lab in enumerate(panel.labels):
                actual = (actuals[g - 1, i]
                          if actuals is not None and g <= holdout else np.nan)
                rows.append((fc.method, g, lab, fc.at(g)[i], actual))
        if actuals is not None:
            g_max = min(h, holdout)
            err = float(np.mean((fc.values[:g_max] - actuals[:g_max]) ** 2))
            mspe_lines.append(f"{fc.method},{g_max},{err:.10g}")
    frame = pd.DataFrame(rows, columns=["method", "horizon", "node", "pred",
                                        "actual"])
    frame.to_csv(out / "forecast.csv", index=False)
    if mspe_lines:
        (out / "forecast_mspe.csv").write_text(
            "method,horizons,mspe\n" + "\n".join(mspe_lines) + "\n")
    if cfg["output"]["figures"]:
        first = next(iter(preds.values()))
        plots.save_forecast_figure(train, first.values, out / "forecast.png",
                                   labels=panel.labels,
                                   actuals=actuals[:h] if actuals is not None
                                   and holdout >= h else None)
    _echo(cfg, out)
    print(f"wrote {out / 'forecast.csv'}")
    return 0


def cmd_select(cfg, args):
    out = _outdir(cfg)
    panel = _load_panel(cfg, args)
    graph = _resolve_graph(cfg, panel)
    orders = []
    for block in args.orders.split(";"):
        p_part, s_part = block.split(":")
        orders.append(GnarOrder(p=int(p_part), s=parse_stages(s_part, int(p_part))))
    m = cfg["model"]
    candidates = []
    for order in orders:
        candidates.append(ModelSpec(
            kind=m["kind"], order=order,
            graph=graph if order.max_stage >= 1 else graph,
            estimation=m["estimation"], alpha_mode=m["alpha_mode"],
            d_mode=m["d_mode"], sigma_mode=m["sigma_mode"],
            scheme=m["weight_scheme"]))
    report = grid_search(panel, candidates, criterion=args.criterion,
                         opts=_fit_options(cfg), holdout=args.holdout)
    (out / "selection.csv").write_text("\n".join(report.lines()) + "\n")
    winner = report.winner
    (out / "selection_winner.txt").write_text(
        winner.spec.describe() + "\n" + "\n".join(winner.fit.report_lines()) + "\n")
    if cfg["output"]["figures"]:
        plots.save_selection_figure(report, out / "selection.png")
    _echo(cfg, out)
    print(f"winner: {winner.spec.describe()}  bic={winner.bic:.3f}")
    return 0


def cmd_graph(cfg, args):
    out = _outdir(cfg)
    data = _load_panel(cfg, args) if getattr(args, "data", None) else None
    graph = _resolve_graph(cfg, data)
    if graph is None:
        raise ValidationError("specify a graph source or a discovery strategy")
    write_graph_file(graph, out / "graph.txt")
    if cfg["output"]["figures"]:
        plots.save_graph_figure(graph, out / "graph.png")
    _echo(cfg, out)
    print(f"wrote {out / 'graph.txt'} ({graph.num_nodes} nodes, "
          f"{graph.num_edges} edges)")
    return 0


def cmd_acv(cfg, args):
    import pandas as pd

    from .autocov import fignar_acv, gnarfi_acv
    from .gnar import GnarParams, filters_from_graph

    out = _outdir(cfg)
    sim = cfg["simulate"]
    if not sim["preset"]:
        raise ValidationError("acv needs a preset (dgp1/dgp2/dgp3)")
    preset = dgp_preset(sim["preset"], cfg["graph"]["source"] or "fivenet")
    filters = filters_from_graph(preset.params, preset.graph, preset.order)
    fn = fignar_acv if cfg["model"]["kind"] == "fignar" else gnarfi_acv
    acv = fn(filters, preset.d, preset.sigma2, args.max_lag)
    rows = [(h, i + 1, k + 1, acv.gammas[h, i, k])
            for h in range(args.max_lag + 1)
            for i in range(acv.dim) for k in range(acv.dim)]
    pd.DataFrame(rows, columns=["h", "i", "k", "value"]).to_csv(
        out / "acv.csv", index=False)
    if cfg["output"]["figures"]:
        plots.save_acv_figure(acv, out / "acv.png",
                              title=f"{preset.name} {cfg['model']['kind']}")
    _echo(cfg, out)
    print(f"wrote {out / 'acv.csv'} (lags 0..{args.max_lag})")
    return 0


def cmd_reproduce(cfg, args):
    from .reproduce import reproduce_table

    out = _outdir(cfg)
    frame = reproduce_table(args.table, scale=args.scale,
                            seed=cfg["simulate"]["seed"] or 20240)
    path = out / f"table_{args.table.upper()}_{args.scale}.csv"
    frame.to_csv(path, index=False)
    if cfg["output"]["figures"]:
        comp_col = "computed" if "computed" in frame else "computed_x1e3"
        ref_col = "reference" if "reference" in frame else (
            "reference_x1e3" if "reference_x1e3" in frame else "reference_of_100")
        show = frame.rename(columns={comp_col: "computed", ref_col: "reference"})
        label_col = [c for c in show.columns
                     if c not in ("computed", "reference", "replicates",
                                  "nonconverged")][0]
        plots.save_table_figure(show, out / f"table_{args.table.upper()}.png",
                                title=f"table {args.table.upper()} ({args.scale})",
                                highlight_col=label_col)
    _echo(cfg, out)
    print(frame.to_string(index=False))
    print(f"wrote {path}")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--output-dir", help="output directory")
    sub.add_argument("--seed", type=int, help="PRNG seed")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker processes (0 = auto)")


def _add_data(sub):
    sub.add_argument("--data", help="series CSV (header = node labels)")
    sub.add_argument("--policy", default="strict",
                     choices=["strict", "interpolate"], help="missing-cell policy")
    sub.add_argument("--demean", action="store_true", help="remove per-node means")
    sub.add_argument("--log", action="store_true", help="log-transform first")


def _add_model(sub):
    sub.add_argument("--kind", choices=["fignar", "gnarfi"])
    sub.add_argument("--estimation", choices=["exact", "conditional"])
    sub.add_argument("--p", type=int)
    sub.add_argument("--s", help="comma-separated stages, one per lag")
    sub.add_argument("--alpha-mode", choices=["global", "individual"])
    sub.add_argument("--d-mode", choices=["global", "individual"])
    sub.add_argument("--sigma-mode", choices=["global", "individual"])
    sub.add_argument("--graph", help="graph file path or fivenet/tennet")
    sub.add_argument("--strategy",
                     choices=["fully_connected", "mst", "gnar_inf_approx"])
    sub.add_argument("--coords", help="coordinates CSV for mst")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="memnet",
        description="Long-memory network time series: simulation, estimation, "
                    "forecasting and selection.")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("simulate", help="draw from a preset generating process")
    _add_common(sp); _add_model(sp)
    sp.add_argument("--preset", help="dgp1 | dgp2 | dgp3")
    sp.add_argument("--T", type=int, help="series length")
    sp.add_argument("--method", choices=["truncated_filter", "exact"])
    sp.set_defaults(func=cmd_simulate)

    fp = subs.add_parser("fit", help="maximum-likelihood fit")
    _add_common(fp); _add_data(fp); _add_model(fp)
    fp.set_defaults(func=cmd_fit)

    cp = subs.add_parser("forecast", help="fit and forecast")
    _add_common(cp); _add_data(cp); _add_model(cp)
    cp.add_argument("--horizon", type=int, default=1)
    cp.add_argument("--methods", default="DLF,EF,RF")
    cp.add_argument("--holdout", type=int, default=0,
                    help="fit on all but the last N rows; emit actuals and MSPE")
    cp.set_defaults(func=cmd_forecast)

    lp = subs.add_parser("select", help="order/model selection over a grid")
    _add_common(lp); _add_data(lp); _add_model(lp)
    lp.add_argument("--orders", default="1:0;1:1;1:2;2:0,0;2:1,0;2:1,1",
                    help="semicolon list of p:s1,s2,... blocks")
    lp.add_argument("--criterion", default="bic", choices=["bic", "aic", "mspe"])
    lp.add_argument("--holdout", type=int, default=0)
    lp.set_defaults(func=cmd_select)

    gp = subs.add_parser("graph", help="build or discover a graph")
    _add_common(gp); _add_data(gp); _add_model(gp)
    gp.set_defaults(func=cmd_graph)

    ap = subs.add_parser("acv", help="model autocovariances as CSV")
    _add_common(ap); _add_model(ap)
    ap.add_argument("--preset", help="dgp1 | dgp2 | dgp3")
    ap.add_argument("--max-lag", type=int, default=20)
    ap.set_defaults(func=cmd_acv)

    rp = subs.add_parser("reproduce", help="recompute a published table")
    _add_common(rp)
    rp.add_argument("table", help="T1..T7, C1, C2")
    rp.add_argument("--scale", default="desk", choices=["desk", "full"])
    rp.set_defaults(func=cmd_reproduce)
    return parser


def _overrides(args) -> dict:
    pairs = {
        ("output", "directory"): getattr(args, "output_dir", None),
        ("output", "threads"): getattr(args, "threads", None),
        ("simulate", "seed"): getattr(args, "seed", None),
        ("simulate", "preset"): getattr(args, "preset", None),
        ("simulate", "t"): getattr(args, "T", None),
        ("simulate", "method"): getattr(args, "method", None),
        ("model", "kind"): getattr(args, "kind", None),
        ("model", "estimation"): getattr(args, "estimation", None),
        ("model", "p"): getattr(args, "p", None),
        ("model", "s"): getattr(args, "s", None),
        ("model", "alpha_mode"): getattr(args, "alpha_mode", None),
        ("model", "d_mode"): getattr(args, "d_mode", None),
        ("model", "sigma_mode"): getattr(args, "sigma_mode", None),
        ("graph", "source"): getattr(args, "graph", None),
        ("graph", "strategy"): getattr(args, "strategy", None),
        ("graph", "coords"): getattr(args, "coords", None),
    }
    return {k: v for k, v in pairs.items() if v is not None}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None), _overrides(args))
        if getattr(args, "p", None) and not getattr(args, "s", None):
            # default stage list: one first-stage term per lag
            cfg["model"]["s"] = ",".join(["1"] * cfg["model"]["p"])
        return args.func(cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
