import json
import subprocess
import sys


from torquefusion import cli, fusion, io

from conftest import CONFIGS


def write_config(tmp_path, name, edit):
    doc = json.loads((CONFIGS / f"{name}.json").read_text())
    edit(doc)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_bad_configs_exit_with_the_config_code(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert cli.main(["generate", "--config", str(broken), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err

    def overlap(doc):
        doc["demonstrations"]["region_b"]["center_m"] = doc["demonstrations"]["region_a"]["center_m"]
    path = write_config(tmp_path, "painting", overlap)
    assert cli.main(["generate", "--config", path, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "region_a" in err and "region_b" in err
    assert cli.main(["generate"]) == cli.EXIT_CONFIG


def test_missing_inputs_name_the_path(tmp_path, capsys):
    config = str(CONFIGS / "shaker.json")
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["train", "--config", config, "--data", str(empty), "--out", str(tmp_path / "m")]) == cli.EXIT_CONFIG
    assert str(empty / "datasets.json") in capsys.readouterr().err
    assert cli.main(["reproduce", "--config", config, "--models", str(empty), "--out", str(tmp_path / "r")]) == cli.EXIT_CONFIG
    assert str(empty / "force.json") in capsys.readouterr().err


def test_generate_and_train_outputs(tmp_path, capsys):
    config = str(CONFIGS / "painting.json")
    outputs = []
    for run in ("a", "b"):
        data, models = tmp_path / run / "data", tmp_path / run / "models"
        assert cli.main(["generate", "--config", config, "--out", str(data)]) == cli.EXIT_OK
        assert cli.main(["train", "--config", config, "--data", str(data), "--out", str(models)]) == cli.EXIT_OK
        outputs.append((data, models))
    printed = capsys.readouterr().out
    assert "handover: gp kernel matern-3/2" in printed and "painting: gp kernel matern-3/2" in printed
    for folder in ("data", "models"):
        first = io.read_json(tmp_path / "a" / folder / cli.MANIFEST)
        second = io.read_json(tmp_path / "b" / folder / cli.MANIFEST)
        assert first["artifacts"] == second["artifacts"] and first["config_hash"] == second["config_hash"]
        for rel, digest in first["artifacts"].items():
            assert io.checksum(tmp_path / "a" / folder / rel) == digest
    report = io.read_json(tmp_path / "a" / "models" / "train_report.json")
    assert [c["kernel"] for c in report["controllers"]] == ["matern-3/2", "matern-3/2"]


def test_seed_override_changes_the_data(tmp_path):
    config = str(CONFIGS / "painting.json")
    cli.main(["generate", "--config", config, "--out", str(tmp_path / "a")])
    cli.main(["generate", "--config", config, "--out", str(tmp_path / "b"), "--seed-override", "99"])
    a, b = io.read_json(tmp_path / "a" / cli.MANIFEST), io.read_json(tmp_path / "b" / cli.MANIFEST)
    assert b["seed"] == 99 and a["artifacts"] != b["artifacts"]


def test_training_report_for_the_shaker(shaker_runs):
    report = io.read_json(shaker_runs[0].models / "train_report.json")
    assert [(c["controller"], c["backend"], c["K"]) for c in report["controllers"]] == \
        [("force", "gmm", 7), ("joint", "gmm", 15)]
    manifest = io.read_json(shaker_runs[0].run / cli.MANIFEST)
    assert manifest["command"] == "reproduce" and manifest["failed"] is False
    assert set(manifest["artifacts"]) == {"log.csv", "metrics.json"}


def test_selftest_passes_and_prints_stable_output(capsys):
    assert cli.main(["selftest"]) == cli.EXIT_OK
    first = capsys.readouterr().out
    assert cli.main(["selftest"]) == cli.EXIT_OK
    assert capsys.readouterr().out == first
    assert first.strip().splitlines()[-1] == "7/7 checks passed"


def test_selftest_names_an_injected_fault(monkeypatch, capsys):
    real = fusion.fuse

    def flipped(components):
        out = real(components)
        return fusion.GaussianBelief(-out.mean, out.cov)

    monkeypatch.setattr(fusion, "fuse", flipped)
    assert cli.main(["selftest"]) == cli.EXIT_SELFTEST
    failing = [line for line in capsys.readouterr().out.splitlines() if line.startswith("FAIL")]
    assert len(failing) == 1 and "fusion.minimizer_oracle" in failing[0]


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "torquefusion", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.startswith("torquefusion ")
