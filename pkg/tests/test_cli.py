import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest
import yaml

from robustrec.cli import main
from robustrec.data import export_generic
from robustrec.harness import load_config, run_experiment

from conftest import make_dataset, random_dataset


@pytest.fixture
def toy_config(tmp_path):
    paths = export_generic(random_dataset(3, n_users=30, n_items=20, n_inter=500), tmp_path / "data")

    def write(**extra):
        raw = {
            "dataset": {"kind": "generic", "interactions": str(paths["interactions_path"]),
                        "user_features": str(paths["user_features_path"]),
                        "item_features": str(paths["item_features_path"]),
                        "schema": str(paths["schema_path"])},
            "models": [{"name": "pop"}, {"name": "lr", "params": {"epochs": 2}}],
            "metrics": {"names": ["ndcg", "auc"], "k": 5},
            "seed": 3,
            "sparsity": {"fraction": 0.3},
        }
        raw.update(extra)
        p = tmp_path / "run.yaml"
        p.write_text(yaml.safe_dump(raw))
        return p
    return write


def test_run_writes_reports_and_table(toy_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(toy_config()), "--out-dir", str(out), "--chart"]) == 0
    assert {p.name for p in out.iterdir()} == {"report.json", "report.csv", "chart.svg"}
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split("\t") == ["model", "metric", "baseline", "perturbed", "pct_change"]
    assert len(lines) == 1 + 4


def test_run_equals_direct_harness_call(toy_config, tmp_path):
    cfg_path = toy_config()
    assert main(["run", "--config", str(cfg_path), "--out-dir", str(tmp_path / "o")]) == 0
    via_cli = json.loads((tmp_path / "o" / "report.json").read_text())
    direct = run_experiment(load_config(cfg_path)).to_dict()
    via_cli.pop("wall_clock_seconds")
    direct.pop("wall_clock_seconds")
    assert via_cli == json.loads(json.dumps(direct))


def test_seed_override_is_echoed(toy_config, tmp_path):
    assert main(["run", "--config", str(toy_config()), "--out-dir", str(tmp_path / "o"), "--seed", "1234"]) == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert doc["seed"] == 1234 and doc["config"]["seed"] == 1234


def test_output_directory_from_config(toy_config, tmp_path):
    cfg = toy_config(output={"directory": "results", "formats": ["json"]})
    assert main(["run", "--config", str(cfg)]) == 0
    assert [p.name for p in (tmp_path / "results").iterdir()] == ["report.json"]


def test_unknown_model_exit_2(toy_config, tmp_path, capsys):
    cfg = toy_config(models=[{"name": "pop"}, {"name": "wide-and-deep"}])
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "models[1].name" in err and len(err.strip().splitlines()) == 1


def test_missing_dataset_exit_3(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"dataset": {"kind": "movielens", "path": "nowhere"}, "models": ["pop"]}))
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 3
    assert "u.data" in capsys.readouterr().err


def test_runtime_failure_exit_1(toy_config, tmp_path, capsys):
    cfg = toy_config(sparsity=None, shift={"feature": "age", "target": {"7": 1.0}})
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 1
    assert "categorical" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.yaml"), "--out-dir", str(tmp_path)]) == 2


def test_chart_subcommand(toy_config, tmp_path):
    assert main(["run", "--config", str(toy_config()), "--out-dir", str(tmp_path / "o")]) == 0
    report = tmp_path / "o" / "report.json"
    assert main(["chart", str(report), str(tmp_path / "a.svg")]) == 0
    assert main(["chart", str(report), str(tmp_path / "b.svg")]) == 0
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert ET.parse(tmp_path / "a.svg").getroot().tag.endswith("svg")


def test_chart_errors_exit_2(toy_config, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["chart", str(bad), str(tmp_path / "x.svg")]) == 2
    assert main(["run", "--config", str(toy_config(sparsity=None)), "--out-dir", str(tmp_path / "o")]) == 0
    assert main(["chart", str(tmp_path / "o" / "report.json"), str(tmp_path / "x.svg")]) == 2
    assert not (tmp_path / "x.svg").exists()


def test_inspect_without_features_omits_marginals(tmp_path, capsys):
    d = make_dataset([0, 1, 2, 0], [0, 1, 1, 2], [1, 2, 5, 4])
    paths = export_generic(d, tmp_path)
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"dataset": {"kind": "generic", "interactions": str(paths["interactions_path"]),
                                               "schema": str(paths["schema_path"])}, "models": ["pop"]}))
    assert main(["inspect", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "interactions\t4" in out and "marginals" not in out


def test_inspect_ml100k(ml100k_dir, tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"dataset": {"kind": "movielens", "path": str(ml100k_dir)}, "models": ["pop"],
                                   "split": {"ratios": [0.8, 0.1, 0.1]}}))
    assert main(["inspect", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "users\t943" in out and "items\t1682" in out and "interactions\t100000" in out
    male = next(l for l in out.splitlines() if l.strip().startswith("M\t"))
    share = float(male.split("\t")[-1].rstrip("%"))
    assert abs(share - 74.0) <= 2.0
    assert "activity quantiles" in out


def test_verbose_logs_to_stderr(toy_config, tmp_path, capfd):
    code = subprocess.call([sys.executable, "-m", "robustrec", "run", "--config", str(toy_config()),
                            "--out-dir", str(tmp_path / "o"), "--verbose"])
    assert code == 0
    captured = capfd.readouterr()
    assert "lr epoch 1/2" in captured.err
    assert "epoch" not in captured.out
