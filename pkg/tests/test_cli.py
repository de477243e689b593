import csv
import json

import numpy as np
import pytest

from kcycle.cli import main, read_config, sha256
from kcycle.graph import degrees
from kcycle.io import load_edge_list, load_params, load_partition


@pytest.fixture
def bench(tmp_path):
    g, c = tmp_path / "g.tsv", tmp_path / "c.tsv"
    assert main(["benchmark", "--n", "40", "--theta", "1.5", "--density", "3", "--seed", "3",
                 "--out", str(g), "--partition-out", str(c)]) == 0
    return g, c


def test_benchmark_and_manifest(tmp_path):
    g, m = tmp_path / "g.tsv", tmp_path / "m.json"
    main(["benchmark", "--n", "30", "--seed", "1", "--out", str(g), "--manifest-out", str(m)])
    doc = json.loads(m.read_text())
    assert doc["command"] == "benchmark" and doc["seed"] == 1
    assert doc["outputs"][str(g)] == sha256(g)
    assert doc["config"]["n"] == 30 and doc["benchmark"]["node_law"]["shape"] == 2.5
    assert {"version", "duration_seconds", "inputs"} <= set(doc)


def test_demo_graph(tmp_path):
    g = tmp_path / "demo.tsv"
    main(["demo-graph", "--out", str(g)])
    assert load_edge_list(g).n_edges == 19079


def test_fit(bench, tmp_path):
    g, _ = bench
    out = tmp_path / "p.json"
    m = tmp_path / "m.json"
    main(["fit", "--input", str(g), "--drop-empty", "--out", str(out), "--manifest-out", str(m)])
    assert load_params(out).n == 40
    assert json.loads(m.read_text())["max_residual"] <= 1e-6


@pytest.mark.parametrize("model", ["kcycle", "wer", "ccm"])
def test_sample(bench, tmp_path, model):
    g, _ = bench
    out = tmp_path / model
    main(["sample", "--input", str(g), "--model", model, "--samples", "3", "--thin", "50",
          "--out-dir", str(out)])
    files = sorted(out.glob("sample_*.tsv"))
    assert len(files) == 3
    G0 = load_edge_list(g, forbidden=() if model == "ccm" else None)
    for f in files:
        H = load_edge_list(f, forbidden=() if model == "ccm" else None)
        if model == "kcycle":
            np.testing.assert_allclose(H.out_strength, G0.out_strength, rtol=1e-12)
            d, d0 = degrees(H), degrees(G0)
            assert np.abs(d.out_deg - d0.out_deg).max() <= 1


def test_significance_report(bench, tmp_path):
    g, c = bench
    r = tmp_path / "r.json"
    main(["significance", "--input", str(g), "--statistic", "within-community", "--partition", str(c),
          "--null", "ccm", "--samples", "20", "--report", str(r)])
    doc = json.loads(r.read_text())
    assert doc["n_samples"] == 20 and 0 <= doc["p_value"] <= 1


def test_randomize_demo_short(tmp_path):
    out = tmp_path / "demo"
    main(["randomize-demo", "--out-dir", str(out), "--iterations", "200000", "--trace-every", "100000"])
    snaps = sorted(out.glob("snapshot_*.tsv"))
    assert [s.name for s in snaps] == ["snapshot_000000000.tsv", "snapshot_000200000.tsv"]
    from kcycle.benchmark import generate_core_periphery

    G0 = generate_core_periphery(np.random.default_rng(0))
    first = load_edge_list(snaps[0])
    assert first == G0
    last = load_edge_list(snaps[1])
    np.testing.assert_allclose(last.out_strength, G0.out_strength, rtol=1e-12)
    with open(out / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["iteration"]) for r in rows] == [0, 100000, 200000]
    assert (out / "occupancy_000000000.csv").exists()


def test_power_study_row_count(tmp_path):
    out = tmp_path / "p.csv"
    main(["power-study", "--out", str(out), "--thetas", "1.0,2.0", "--models", "kcycle-m1,wer",
          "--replications", "2", "--samples", "5", "--n", "30"])
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2 * 2 * 2
    assert list(rows[0]) == ["theta", "null_model", "statistic", "replication", "p_value", "seed"]


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("# defaults\ntheta = 2.0\nn = 25\ndensity=2\n")
    assert read_config(cfg) == {"theta": "2.0", "n": "25", "density": "2"}
    m = tmp_path / "m.json"
    main(["benchmark", "--config", str(cfg), "--n", "35", "--out", str(tmp_path / "g.tsv"),
          "--manifest-out", str(m)])
    conf = json.loads(m.read_text())["config"]
    assert conf["n"] == 35 and conf["theta"] == 2.0 and conf["density"] == 2.0
    bad = tmp_path / "bad.txt"
    bad.write_text("nonsense = 1\n")
    with pytest.raises(SystemExit):
        main(["benchmark", "--config", str(bad), "--out", str(tmp_path / "h.tsv")])


def test_rerun_from_manifest_is_identical(bench, tmp_path):
    g, c = bench
    out = tmp_path / "s"
    m = tmp_path / "m.json"
    main(["sample", "--input", str(g), "--samples", "2", "--thin", "100", "--out-dir", str(out),
          "--seed", "11", "--manifest-out", str(m)])
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    for p in out.iterdir():
        p.unlink()
    main(["--from-manifest", str(m)])
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first
    doc = json.loads(m.read_text())
    assert all(sha256(p) == h for p, h in doc["outputs"].items())
