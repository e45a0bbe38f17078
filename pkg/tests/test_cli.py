import json

import numpy as np
import pytest

from paneldbn import save_panel
from paneldbn.analysis import DynamicBN, fit_parameters
from paneldbn.cli import main
from paneldbn.graphs import TwoSliceGraph

from conftest import make_panel
from test_gaussian import table_from


@pytest.fixture
def workspace(tmp_path):
    spec = {
        "n_conditions": 3,
        "arcs_per_condition": 1.0,
        "coefficient_range": [0.4, 0.6],
        "noise_sd_range": [0.3, 0.3],
        "county_intercept_sd": 0.05,
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    panel_path = tmp_path / "panel.csv"
    truth_path = tmp_path / "truth.json"
    rc = main(
        [
            "simulate",
            "--spec", str(spec_path),
            "--counties", "25",
            "--weeks", "40",
            "--seed", "5",
            "--out", str(panel_path),
            "--truth", str(truth_path),
        ]
    )
    assert rc == 0
    return tmp_path


def test_simulate_writes_panel_truth_and_manifest(workspace):
    assert (workspace / "panel.csv").exists()
    assert (workspace / "truth.json").exists()
    manifest = json.loads((workspace / "panel.csv.manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 5
    assert any(k.endswith("spec.json") for k in manifest["inputs"])
    header = (workspace / "panel.csv").read_text().splitlines()[0]
    assert header.startswith("date,state_code,county_code,")


def test_learn_outputs_are_byte_identical_across_runs(workspace):
    args = [
        "learn",
        "--input", str(workspace / "panel.csv"),
        "--w", "1",
        "--bootstrap", "15",
        "--sample-frac", "0.75",
        "--seed", "42",
    ]
    out1, out2 = workspace / "m1.json", workspace / "m2.json"
    input_before = (workspace / "panel.csv").read_bytes()
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2), "--threads", "2"]) == 0
    assert (workspace / "panel.csv").read_bytes() == input_before  # inputs untouched
    assert out1.read_bytes() == out2.read_bytes()
    s1 = (workspace / "m1.json.strengths.csv").read_bytes()
    s2 = (workspace / "m2.json.strengths.csv").read_bytes()
    assert s1 == s2
    sidecar = json.loads((workspace / "m1.json.strengths.csv.json").read_text())
    assert sidecar["replicates"] == 15
    assert 0 < sidecar["threshold"] <= 1
    model = json.loads(out1.read_text())
    DynamicBN.from_dict(model)  # validates structure


def test_learned_model_recovers_truth_arcs(workspace):
    out = workspace / "model.json"
    assert main(
        [
            "learn",
            "--input", str(workspace / "panel.csv"),
            "--w", "1",
            "--bootstrap", "25",
            "--seed", "7",
            "--out", str(out),
        ]
    ) == 0
    learned = DynamicBN.from_dict(json.loads(out.read_text()))
    truth = DynamicBN.from_dict(json.loads((workspace / "truth.json").read_text()))
    missing = truth.graph.cross_arcs() - learned.graph.cross_arcs()
    assert not missing


def test_fold_and_export_dot(workspace, tmp_path):
    model = tmp_path / "truthcopy.json"
    model.write_text((workspace / "truth.json").read_text())
    folded = tmp_path / "folded.json"
    assert main(["fold", "--model", str(model), "--out", str(folded)]) == 0
    data = json.loads(folded.read_text())
    assert set(data) == {"conditions", "edges"}
    dot = tmp_path / "graph.dot"
    assert main(["export-dot", "--model", str(model), "--out", str(dot)]) == 0
    assert dot.read_text().startswith("digraph")


def test_export_dot_empty_model_lists_isolated_nodes(tmp_path, rng):
    conditions = tuple(f"N{i:02d}" for i in range(12))
    table = table_from(
        rng.normal(size=(60, 12)), rng.normal(size=(60, 12)), conditions
    )
    dbn = fit_parameters(TwoSliceGraph(conditions=conditions), table)
    model = tmp_path / "empty.json"
    model.write_text(json.dumps(dbn.to_dict()))
    out = tmp_path / "empty.dot"
    assert main(["export-dot", "--model", str(model), "--out", str(out)]) == 0
    dot = out.read_text()
    assert "->" not in dot
    assert sum(1 for line in dot.splitlines() if line.strip().endswith('";')) == 12


def test_impute_cli_roundtrip(tmp_path, rng):
    values = rng.uniform(1, 3, size=(4, 12, 2))
    values[0, 3, 0] = np.nan
    values[2, 7, 1] = np.nan
    panel_path = tmp_path / "gaps.csv"
    save_panel(make_panel(values), panel_path)
    out = tmp_path / "filled.csv"
    report = tmp_path / "summary.json"
    rc = main(
        ["impute", "--input", str(panel_path), "--k", "4",
         "--out", str(out), "--report", str(report)]
    )
    assert rc == 0
    summary = json.loads(report.read_text())
    assert summary["n_imputed"] == 2
    filled = out.read_text()
    assert ",," not in filled.replace("\r", "")
    assert (tmp_path / "filled.csv.manifest.json").exists()


def test_impute_eval_cli(workspace):
    report = workspace / "eval.json"
    rc = main(
        [
            "impute-eval",
            "--input", str(workspace / "panel.csv"),
            "--pattern", "batch4",
            "--fraction", "0.1",
            "--seed", "3",
            "--report", str(report),
        ]
    )
    assert rc == 0
    data = json.loads(report.read_text())
    assert data["n_imputed"] > 0
    assert data["mean_relative_error"] >= 0


def test_tune_w_cli(workspace):
    out = workspace / "tune.csv"
    rc = main(
        [
            "tune-w",
            "--input", str(workspace / "panel.csv"),
            "--grid", "1,8",
            "--split-week", "20",
            "--out", str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "w,train_r2,validation_r2,arc_count"
    assert len(lines) == 3


def test_varprop_cli_plain_and_stratified(workspace):
    truth = json.loads((workspace / "truth.json").read_text())
    dbn = DynamicBN.from_dict(truth)
    target = next(
        c for c in dbn.conditions
        if any(p != c for p in dbn.graph.parents_of(c))
    )
    driver = next(p for p in dbn.graph.parents_of(target) if p != target)
    out = workspace / "shares.csv"
    rc = main(
        [
            "varprop",
            "--model", str(workspace / "truth.json"),
            "--data", str(workspace / "panel.csv"),
            "--target", target,
            "--out", str(out),
        ]
    )
    assert rc == 0
    assert out.read_text().splitlines()[0] == "parent,raw_share,normalized_share"
    strat = workspace / "strat.csv"
    stratifier = dbn.conditions[0]
    rc = main(
        [
            "varprop",
            "--model", str(workspace / "truth.json"),
            "--data", str(workspace / "panel.csv"),
            "--target", target,
            "--driver", driver,
            "--stratify", stratifier,
            "--out", str(strat),
        ]
    )
    assert rc == 0
    lines = strat.read_text().strip().splitlines()
    assert lines[0] == "level,share"
    assert [l.split(",")[0] for l in lines[1:]] == ["low", "average", "high", "unstratified"]


def test_compare_static_cli(workspace):
    out = workspace / "static.json"
    rc = main(
        [
            "compare-static",
            "--input", str(workspace / "panel.csv"),
            "--model", str(workspace / "truth.json"),
            "--w", "1",
            "--out", str(out),
        ]
    )
    assert rc == 0
    report = json.loads(out.read_text())
    assert set(report["counts"]) == {"correct", "feedback", "reversed", "spurious"}
    assert sum(report["counts"].values()) == report["n_static_arcs"]


def test_unknown_flag_exits_64(workspace, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["learn", "--input", "x.csv", "--out", "y.json", "--bogus"])
    assert exc.value.code == 64


def test_missing_input_exits_1(tmp_path, capsys):
    rc = main(
        ["learn", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "m.json")]
    )
    assert rc == 1


def test_validation_error_exits_1(tmp_path, capsys, rng):
    values = rng.uniform(1, 2, size=(2, 10, 1))
    values[0, 0, 0] = np.nan  # incomplete panel: injection must refuse
    panel_path = tmp_path / "gappy.csv"
    save_panel(make_panel(values), panel_path)
    rc = main(
        [
            "impute-eval",
            "--input", str(panel_path),
            "--pattern", "single",
            "--fraction", "0.05",
            "--report", str(tmp_path / "r.json"),
        ]
    )
    assert rc == 1
