import json
import subprocess
import sys

import jsonschema
import pytest

from trfl import cli
from trfl.exceptions import NumericalError
from trfl.schemas import NAMES, load_schema


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    assert code == 0, err
    return json.loads(out)


class TestAnalysisCommands:
    def test_rf_report_resnet(self, capsys):
        payload = run_json(capsys, "rf-report", "--arch", "resnet50-3d", "--input-frames", "64")
        assert payload["last_conv"]["rf"] == 217
        jsonschema.validate(payload, load_schema("rf_report"))

    def test_rf_report_with_shapes(self, capsys):
        payload = run_json(capsys, "rf-report", "--arch", "video-bagnet-9", "--input-size", "64", "64")
        shapes = {n["node"]: n["shape"] for n in payload["nodes"]}
        assert shapes["conv5_3.relu"][1] == 28
        jsonschema.validate(payload, load_schema("rf_report"))

    def test_rf_report_csv(self, capsys):
        code, out, _ = run(capsys, "rf-report", "--arch", "video_bagnet_1", "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "node,rf,jump,offset,length"

    def test_param_count(self, capsys):
        payload = run_json(capsys, "param-count", "--arch", "video-bagnet-9", "--classes", "3")
        assert payload["parameters"] == pytest.approx(46.7e6, rel=0.05)
        jsonschema.validate(payload, load_schema("param_count"))

    def test_sensitivity_bagnet1(self, capsys):
        payload = run_json(capsys, "sensitivity", "--arch", "video-bagnet-1", "--video-len", "64",
                           "--segment-len", "32")
        assert payload["rows"][0]["ratio"] == 1.0
        jsonschema.validate(payload, load_schema("sensitivity"))

    def test_sensitivity_sweep(self, capsys):
        payload = run_json(capsys, "sensitivity", "--arch", "resnet50_3d", "bn9", "bn33",
                           "--durations", "16", "32")
        assert len(payload["rows"]) == 6
        jsonschema.validate(payload, load_schema("sensitivity"))

    def test_text_output(self, capsys):
        code, out, _ = run(capsys, "param-count", "--arch", "resnet50_3d")
        assert code == 0 and "parameters:" in out

    def test_arch_file(self, capsys, tmp_path):
        from trfl.arch import video_bagnet

        path = tmp_path / "arch.json"
        path.write_text(json.dumps(video_bagnet(17).to_dict()))
        payload = run_json(capsys, "rf-report", "--arch", str(path))
        assert payload["last_conv"]["rf"] == 17

    def test_idempotent(self, capsys):
        a = run(capsys, "rf-report", "--arch", "bn17", "--format", "json")
        b = run(capsys, "rf-report", "--arch", "bn17", "--format", "json")
        assert a == b


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["frobnicate"])
        assert info.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["rf-report", "--no-such-flag"])
        assert info.value.code == 1

    def test_help(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["train", "--help"])
        assert info.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--run-dir", "--dataset", "--lr", "--seed", "--format", "--eval-split"):
            assert flag in out

    def test_bad_preset_is_config_error(self, capsys):
        code, out, err = run(capsys, "rf-report", "--arch", "alexnet")
        assert code == 2 and out == "" and "error" in err

    def test_too_short_clip(self, capsys):
        code, _, err = run(capsys, "rf-report", "--arch", "bn33", "--input-frames", "16")
        assert code == 2 and "node" in err

    def test_missing_layout_flags_is_usage(self, capsys):
        code, _, _ = run(capsys, "sensitivity", "--arch", "bn9")
        assert code == 1

    def test_numerical_failure(self, capsys, monkeypatch):
        def boom(args):
            raise NumericalError("loss is nan")

        monkeypatch.setattr(cli, "cmd_param_count", boom)
        code, _, err = run(capsys, "param-count")
        assert code == 3 and "nan" in err

    def test_console_module(self):
        proc = subprocess.run([sys.executable, "-m", "trfl.cli", "param-count", "--arch", "bn1",
                               "--format", "json"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["model"] == "video_bagnet_1"


class TestDataAndTraining:
    @pytest.fixture
    def dataset(self, capsys, tmp_path):
        payload = run_json(capsys, "gen-data", "--out", str(tmp_path / "data"), "--d", "5",
                           "--canvas", "20", "20", "--videos-per-class", "4", "--glyph-size", "14",
                           "--seed", "3")
        jsonschema.validate(payload, load_schema("gen_data"))
        return tmp_path / "data", payload

    def test_gen_data_layout(self, dataset):
        root, payload = dataset
        assert sorted(p.name for p in root.iterdir()) == ["test_noperm", "test_perm", "train"]
        assert [s["videos"] for s in payload["splits"]] == [12, 12, 12]
        assert payload["config"]["seed"] == 3

    def test_gen_data_idempotent(self, capsys, dataset, tmp_path):
        root, _ = dataset
        run_json(capsys, "gen-data", "--out", str(tmp_path / "again"), "--d", "5", "--canvas", "20", "20",
                 "--videos-per-class", "4", "--glyph-size", "14", "--seed", "3")
        for split in ("train", "test_perm"):
            for f in ("manifest.json", "videos.bin"):
                assert (root / split / f).read_bytes() == (tmp_path / "again" / split / f).read_bytes()

    def test_gen_data_bad_canvas(self, capsys, tmp_path):
        code, _, err = run(capsys, "gen-data", "--out", str(tmp_path), "--canvas", "10", "10")
        assert code == 2 and "canvas" in err

    def test_train_then_eval(self, capsys, dataset, tmp_path):
        root, _ = dataset
        run_dir = tmp_path / "run"
        summary = run_json(capsys, "train", "--dataset", str(root), "--run-dir", str(run_dir),
                           "--arch", "video-bagnet-9", "--width", "0.05", "--epochs", "1",
                           "--eval-split", "test_noperm", "--seed", "2")
        jsonschema.validate(summary, load_schema("train_results"))
        assert json.loads((run_dir / "results.json").read_text())["run"] == summary["run"]
        row = run_json(capsys, "eval", "--checkpoint", str(run_dir / "best.ckpt"),
                       "--split", str(root / "test_noperm"))
        jsonschema.validate(row, load_schema("metrics_row"))
        assert row["metric"] == pytest.approx(summary["evaluations"]["test_noperm"]["metric"])
        assert json.loads((run_dir / "config.json").read_text())["seed"] == 2

    def test_train_config_file(self, capsys, dataset, tmp_path):
        root, _ = dataset
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model": "video_bagnet_9", "width": 0.05, "epochs": 1,
                                   "dataset": str(root)}))
        summary = run_json(capsys, "train", "--config", str(cfg), "--run-dir", str(tmp_path / "r"))
        assert summary["model"] == "video_bagnet_9"

    def test_eval_corrupt_checkpoint(self, capsys, dataset, tmp_path):
        root, _ = dataset
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"nope")
        code, _, err = run(capsys, "eval", "--checkpoint", str(bad), "--split", str(root / "test_perm"))
        assert code == 2 and "checkpoint" in err

    def test_train_without_dataset_is_usage(self, capsys, tmp_path):
        code, _, _ = run(capsys, "train", "--run-dir", str(tmp_path))
        assert code == 1

    def test_experiment_small(self, capsys, tmp_path):
        payload = run_json(capsys, "experiment", "fig3", "--scale", "tiny", "--out", str(tmp_path),
                           "--durations", "5", "--videos-per-class", "3", "--epochs", "1",
                           "--models", "video-bagnet-9")
        jsonschema.validate(payload, load_schema("fig3_results"))
        assert len(payload["rows"]) == 2


def test_all_schemas_are_valid():
    for name in NAMES:
        jsonschema.Draft202012Validator.check_schema(load_schema(name))
