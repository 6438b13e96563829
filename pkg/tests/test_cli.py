import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from memnet.cli import main
from memnet.config import CONFIG_SCHEMA, default_config, load_config, parse_stages
from memnet.errors import LeadingGap, MalformedCSV, ValidationError
from memnet.ingest import ingest_series, write_series
from memnet.simulate import SeriesPanel


# -- config ---------------------------------------------------------------

def test_config_defaults_documented():
    cfg = default_config()
    for section, keys in CONFIG_SCHEMA.items():
        for key, (typ, default, doc) in keys.items():
            assert doc, f"[{section}] {key} lacks documentation"
            assert cfg[section][key] == default


def test_config_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[model]\nwhatever = 3\n")
    with pytest.raises(ValidationError):
        load_config(path)
    path.write_text("[mystery]\nx = 1\n")
    with pytest.raises(ValidationError):
        load_config(path)


def test_config_file_plus_overrides(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[simulate]\nt = 123\nseed = 9\n")
    cfg = load_config(path, {("simulate", "seed"): 11})
    assert cfg["simulate"]["t"] == 123
    assert cfg["simulate"]["seed"] == 11


def test_parse_stages():
    assert parse_stages("1,0", 2) == (1, 0)
    with pytest.raises(ValidationError):
        parse_stages("1", 2)


# -- ingestion ------------------------------------------------------------

def test_ingest_identity_round_trip(tmp_path):
    panel = SeriesPanel(values=np.arange(12.0).reshape(4, 3),
                        labels=("a", "b", "c"))
    path = tmp_path / "x.csv"
    write_series(panel, path)
    back = ingest_series(path)
    assert back.labels == ("a", "b", "c")
    np.testing.assert_allclose(back.values, panel.values)


def test_ingest_strict_rejects_gap(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n,3\n4,5\n")
    with pytest.raises(MalformedCSV):
        ingest_series(path, policy="strict")


def test_ingest_interpolates_interior_gap(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,0\n,1\n3,2\n")
    panel = ingest_series(path, policy="interpolate")
    np.testing.assert_allclose(panel.values[:, 0], [1, 2, 3])


def test_ingest_leading_gap_rejected(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n,0\n2,1\n3,2\n")
    with pytest.raises(LeadingGap):
        ingest_series(path, policy="interpolate")


def test_ingest_transforms(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a\n1\n2\n4\n")
    panel = ingest_series(path, log_transform=True, demean=True)
    assert abs(panel.values.mean()) < 1e-12


# -- commands -------------------------------------------------------------

def test_simulate_command_writes_everything(tmp_path):
    out = tmp_path / "sim"
    rc = main(["simulate", "--preset", "dgp1", "--graph", "fivenet",
               "--T", "80", "--seed", "1", "--output-dir", str(out)])
    assert rc == 0
    frame = pd.read_csv(out / "series.csv")
    assert frame.shape == (80, 5)
    meta = json.loads((out / "series_meta.json").read_text())
    assert meta["seed"] == 1 and meta["prng"] == "pcg64"
    assert (out / "resolved_config.ini").exists()
    assert (out / "series.png").exists()


def test_simulate_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["simulate", "--preset", "dgp1", "--T", "50", "--seed", "7",
              "--output-dir", str(out)])
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()


def test_simulate_tennet_metadata(tmp_path):
    out = tmp_path / "t"
    rc = main(["simulate", "--preset", "dgp3", "--graph", "tennet",
               "--T", "40", "--seed", "2", "--output-dir", str(out)])
    assert rc == 0
    meta = json.loads((out / "series_meta.json").read_text())
    np.testing.assert_allclose(meta["d"][-1], 0.45)
    assert pd.read_csv(out / "series.csv").shape == (40, 10)


def test_fit_command_and_validation(tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", "--preset", "dgp1", "--T", "120", "--seed", "3",
          "--output-dir", str(sim)])
    out = tmp_path / "fit"
    rc = main(["fit", "--data", str(sim / "series.csv"), "--graph", "fivenet",
               "--kind", "fignar", "--p", "1", "--s", "1",
               "--alpha-mode", "global", "--output-dir", str(out)])
    assert rc == 0
    report = (out / "fit_report.txt").read_text()
    assert "loglik=" in report and "converged=" in report

    # conditional estimation is tied to the noise-first composition
    rc = main(["fit", "--data", str(sim / "series.csv"), "--graph", "fivenet",
               "--kind", "fignar", "--estimation", "conditional",
               "--output-dir", str(tmp_path / "bad")])
    assert rc == 2

    # an order with neighbour stages but no graph is a validation error
    rc = main(["fit", "--data", str(sim / "series.csv"), "--kind", "fignar",
               "--p", "1", "--s", "1", "--output-dir", str(tmp_path / "bad2")])
    assert rc == 2


def test_forecast_command(tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", "--preset", "dgp1", "--T", "100", "--seed", "4",
          "--output-dir", str(sim)])
    out = tmp_path / "fc"
    rc = main(["forecast", "--data", str(sim / "series.csv"), "--graph",
               "fivenet", "--kind", "fignar", "--horizon", "3",
               "--methods", "EF,RF", "--output-dir", str(out)])
    assert rc == 0
    frame = pd.read_csv(out / "forecast.csv")
    assert set(frame.columns) == {"method", "horizon", "node", "pred"}
    assert sorted(frame["method"].unique()) == ["EF", "RF"]
    assert frame.shape[0] == 2 * 3 * 5
    assert (out / "forecast.png").exists()


def test_graph_command_mst(tmp_path):
    coords = tmp_path / "coords.csv"
    coords.write_text("node,x,y\n1,0,0\n2,1,0\n3,3,0\n")
    out = tmp_path / "g"
    rc = main(["graph", "--strategy", "mst", "--coords", str(coords),
               "--output-dir", str(out)])
    assert rc == 0
    text = (out / "graph.txt").read_text()
    assert text.startswith("N 3")
    assert (out / "graph.png").exists()


def test_acv_command(tmp_path):
    out = tmp_path / "acv"
    rc = main(["acv", "--preset", "dgp1", "--kind", "fignar",
               "--max-lag", "6", "--output-dir", str(out)])
    assert rc == 0
    frame = pd.read_csv(out / "acv.csv")
    assert list(frame.columns) == ["h", "i", "k", "value"]
    assert frame.shape[0] == 7 * 25
    lag0 = frame[(frame.h == 0) & (frame.i == frame.k)]
    assert (lag0["value"] > 0).all()


def test_select_command(tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", "--preset", "dgp1", "--T", "120", "--seed", "5",
          "--output-dir", str(sim)])
    out = tmp_path / "sel"
    rc = main(["select", "--data", str(sim / "series.csv"), "--graph", "fivenet",
               "--kind", "fignar", "--alpha-mode", "global",
               "--orders", "1:0;1:1", "--output-dir", str(out)])
    assert rc == 0
    text = (out / "selection.csv").read_text()
    assert text.startswith("candidate,converged")
    assert (out / "selection_winner.txt").exists()


def test_unknown_table_exit_code(tmp_path):
    rc = main(["reproduce", "T99", "--output-dir", str(tmp_path / "r")])
    assert rc == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "memnet.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("simulate", "fit", "forecast", "select", "graph", "acv",
                "reproduce"):
        assert sub in proc.stdout


def test_reproduce_command_glue(tmp_path, monkeypatch):
    import memnet.reproduce as rep

    def tiny_table(table, scale="desk", seed=0):
        return pd.DataFrame({"row": ["a", "b"], "replicates": [2, 2],
                             "computed": [1.0, 2.0], "reference": [1.1, 2.2]})

    monkeypatch.setattr(rep, "reproduce_table", tiny_table)
    out = tmp_path / "rep"
    rc = main(["reproduce", "T4", "--scale", "desk", "--output-dir", str(out)])
    assert rc == 0
    frame = pd.read_csv(out / "table_T4_desk.csv")
    assert list(frame["computed"]) == [1.0, 2.0]
    assert (out / "table_T4.png").exists()
