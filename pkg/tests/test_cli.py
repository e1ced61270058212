"""End-to-end command line runs"""

import csv
import json

import pytest

import config_loader
from hybmt_cli import main
from model_io import model_kind
from run_manifest import file_digest, read_manifest


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    monkeypatch.delenv("HYBMT_CONFIG", raising=False)
    monkeypatch.setattr(config_loader, "_config_manager", None)


def test_stats(tmp_path, c17_path, capsys):
    assert main(["--out-dir", str(tmp_path), "stats", str(c17_path)]) == 0
    summary = json.loads(capsys.readouterr().out.splitlines()[0])
    assert summary["name"] == "c17"
    assert (summary["nets"], summary["gates"], summary["inputs"], summary["outputs"]) == (11, 6, 5, 2)

    manifest = read_manifest(tmp_path / "stats.manifest.json")
    assert manifest.command == "stats"
    assert manifest.outputs == {"stats.csv": file_digest(tmp_path / "stats.csv")}
    assert str(c17_path) in manifest.input_digests


def test_testability_and_rank_faults(tmp_path, c17_path):
    assert main(["--out-dir", str(tmp_path), "testability", str(c17_path)]) == 0
    assert (tmp_path / "c17.features.csv").read_text().startswith("net,cc,co,dist_norm,")
    assert main(["--out-dir", str(tmp_path), "rank-faults", str(c17_path), "--faults", "hard:4"]) == 0
    assert len((tmp_path / "c17.faults.csv").read_text().splitlines()) == 5


def test_atpg_with_vectors(tmp_path, c17_path):
    argv = ["--out-dir", str(tmp_path), "atpg", str(c17_path), "--faults", "all", "--vectors"]
    assert main(argv) == 0
    campaign = (tmp_path / "c17.cop.campaign.csv").read_text().splitlines()
    assert len(campaign) == 1 + 22 + 1
    summary = json.loads(campaign[-1][2:])
    assert summary["coverage_percent"] == 100.0
    assert (tmp_path / "c17.cop.vectors.csv").exists()
    assert (tmp_path / "c17.cop.coverage.csv").exists()
    assert set(read_manifest(tmp_path / "atpg.manifest.json").outputs) == {
        "c17.cop.campaign.csv", "c17.cop.vectors.csv", "c17.cop.coverage.csv"}


def test_compare_identical_campaigns(tmp_path, c17_path):
    assert main(["--out-dir", str(tmp_path), "atpg", str(c17_path), "--faults", "hard:6"]) == 0
    campaign = str(tmp_path / "c17.cop.campaign.csv")
    argv = ["--out-dir", str(tmp_path), "compare", "--a", campaign, "--b", campaign,
            "--meta-labels-out", "labels.csv"]
    assert main(argv) == 0
    rows = (tmp_path / "comparison.csv").read_text().splitlines()
    assert len(rows) == 2
    assert (tmp_path / "labels.csv").read_text().splitlines() == ["circuit,class", "c17,0"]


def test_gen_data_train_and_guided_atpg(tmp_path, c17_path):
    out = ["--out-dir", str(tmp_path)]
    assert main(out + ["gen-data", str(c17_path), "--k-hard", "10"]) == 0
    assert main(out + ["train", "--data", str(tmp_path / "training.csv"), "--kind", "svr", "--folds", "2"]) == 0
    assert model_kind(tmp_path / "svr.model") == "svr"
    resolved = read_manifest(tmp_path / "train.manifest.json").flags["resolved_config"]
    assert resolved["kernel"] == "rbf"

    model = f"model:{tmp_path / 'svr.model'}"
    assert main(out + ["atpg", str(c17_path), "--faults", "all", "--heuristic", model]) == 0
    assert (tmp_path / "c17.model.campaign.csv").exists()


def test_train_takes_row_folds_from_datagen_config(tmp_path, c17_path):
    config = tmp_path / "config.yaml"
    config.write_text("datagen:\n  folds: 3\ncross_validation:\n  folds: 4\n")
    out = ["--config", str(config), "--out-dir", str(tmp_path)]
    assert main(out + ["gen-data", str(c17_path), "--k-hard", "22"]) == 0
    assert main(out + ["train", "--data", str(tmp_path / "training.csv"), "--kind", "hybnn", "--cv-out", "cv.csv"]) == 0
    with open(tmp_path / "cv.csv", newline="") as f:
        folds = {row["fold"] for row in csv.DictReader(f)}
    assert folds == {"0", "1", "2"}


@pytest.mark.parametrize("argv", [
    ["stats"],
    ["atpg", "x.bench", "--faults", "hard:0"],
    ["atpg", "x.bench", "--heuristic", "scoap"],
    ["gen-data", "x.bench", "--backtrack-limit", "-1"],
    ["frobnicate"],
])
def test_usage_errors(tmp_path, argv):
    assert main(["--out-dir", str(tmp_path)] + argv) == 1


def test_duplicate_circuit_names(tmp_path, c17_path):
    assert main(["--out-dir", str(tmp_path), "stats", str(c17_path), str(c17_path)]) == 1


def test_input_errors(tmp_path):
    broken = tmp_path / "broken.bench"
    broken.write_text("INPUT(a)\nOUTPUT(y)\ny = AND(a, missing)\n")
    assert main(["--out-dir", str(tmp_path), "stats", str(broken)]) == 2
    assert main(["--out-dir", str(tmp_path), "stats", str(tmp_path / "absent.bench")]) == 2


def test_bad_config_is_a_usage_error(tmp_path, c17_path):
    config = tmp_path / "bad.yaml"
    config.write_text("svr:\n  kernel: poly\n")
    assert main(["--config", str(config), "--out-dir", str(tmp_path), "stats", str(c17_path)]) == 1
