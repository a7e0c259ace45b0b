import json
from pathlib import Path

import numpy as np

from gpn import cli

FAST_SETS = [
    "--set", "train.epochs_pretrain=2",
    "--set", "train.epochs_main=3",
    "--set", "dataset.n_per_block=15",
    "--set", "split.per_class_train=4",
    "--set", "split.per_class_val=4",
]


def read_report(out_dir):
    return json.loads((Path(out_dir) / "report.json").read_text())


class TestTrainCommand:
    def test_writes_report_and_checkpoint(self, tmp_path):
        out = tmp_path / "run"
        code = cli.main(["train", "--out", str(out), "--set", "method=gpn-foa", *FAST_SETS])
        assert code == 0
        report = read_report(out)
        assert report["method"] == "gpn-foa"
        assert "config_hash" in report
        assert (out / "checkpoint" / "manifest.json").is_file()
        assert (out / "checkpoint" / "weights.bin").is_file()

    def test_missing_config_exits_one(self, tmp_path, capsys):
        code = cli.main(["train", "--config", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path / "o")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_override_exits_one(self, tmp_path, capsys):
        code = cli.main(["train", "--out", str(tmp_path / "o"),
                         "--set", "train.bogus_field=1"])
        assert code == 1
        assert "bogus_field" in capsys.readouterr().err

    def test_unknown_command_exits_two(self):
        assert cli.main(["frobnicate"]) == 2

    def test_identical_config_identical_report(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        argv = ["train", "--set", "method=gcn", "--seed", "5", *FAST_SETS]
        assert cli.main(argv + ["--out", str(out1)]) == 0
        assert cli.main(argv + ["--out", str(out2)]) == 0
        r1, r2 = read_report(out1), read_report(out2)
        r1.pop("wall_clock_sec")
        r2.pop("wall_clock_sec")
        assert r1 == r2

    def test_config_file_with_overrides(self, tmp_path):
        cfg = {
            "method": "gcn",
            "dataset": {"kind": "sbm", "n_per_block": 12, "n_blocks": 2,
                        "p_in": 0.4, "p_out": 0.05, "feat_dim": 4, "feat_noise": 0.5},
            "split": {"mode": "random", "per_class_train": 3, "per_class_val": 3},
            "train": {"epochs_pretrain": 1, "epochs_main": 2, "seed": 3},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "o"
        code = cli.main(["train", "--config", str(path), "--out", str(out),
                         "--set", "train.epochs_main=1"])
        assert code == 0
        report = read_report(out)
        assert report["effective_config"]["train"]["epochs_main"] == 1
        # the baseline runs epochs_pretrain + epochs_main epochs for parity
        assert len(report["epochs"]) == 2

    def test_bad_config_field_in_file(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"trian": {}}))
        code = cli.main(["train", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "trian" in capsys.readouterr().err


class TestNeutralDatasetPath:
    def test_relative_path_resolved_against_data_dir(self, toy_dataset_dir, tmp_path,
                                                     monkeypatch):
        monkeypatch.setenv("GPN_DATA_DIR", str(toy_dataset_dir.parent))
        out = tmp_path / "run"
        code = cli.main([
            "train", "--out", str(out), "--set", "method=gcn",
            "--set", f"dataset={{\"kind\": \"neutral\", \"path\": \"{toy_dataset_dir.name}\"}}",
            "--set", "split.mode=fixed",
            "--set", "split.per_class_train=1", "--set", "split.per_class_val=1",
            "--set", "train.epochs_pretrain=0", "--set", "train.epochs_main=2",
        ])
        assert code == 0
        report = read_report(out)
        assert report["n_nodes"] == 6


class TestEvalCommand:
    def test_eval_checkpoint(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert cli.main(["train", "--out", str(out), "--set", "method=gpn-foa",
                         *FAST_SETS]) == 0
        report = read_report(out)
        code = cli.main(["eval", "--checkpoint", str(out / "checkpoint"), *FAST_SETS])
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload["test_accuracy"] == report["test_accuracy"]


class TestSweepCommands:
    def test_sweep_writes_results(self, tmp_path):
        out = tmp_path / "sweep"
        code = cli.main([
            "sweep", "--out", str(out), "--set", "method=gcn",
            "--set", "experiment.drop_ratios=[0.0,0.5]",
            "--set", "experiment.n_seeds=1", *FAST_SETS,
        ])
        assert code == 0
        results = json.loads((out / "results.json").read_text())
        assert len(results["rows"]) == 2
        assert (out / "results.csv").is_file()
        assert (out / "plot.csv").is_file()

    def test_parallel_jobs_match_serial(self, tmp_path):
        args = [
            "sweep", "--set", "method=gcn",
            "--set", "experiment.drop_ratios=[0.0,0.5]",
            "--set", "experiment.n_seeds=2", *FAST_SETS,
        ]
        out1, out2 = tmp_path / "serial", tmp_path / "parallel"
        assert cli.main(args + ["--out", str(out1)]) == 0
        assert cli.main(args + ["--out", str(out2), "--jobs", "2"]) == 0
        assert (out1 / "results.json").read_text() == (out2 / "results.json").read_text()

    def test_inductive_grid(self, tmp_path):
        out = tmp_path / "ind"
        code = cli.main([
            "inductive", "--out", str(out), "--set", "method=gcn",
            "--set", "experiment.node_ratios=[0.8,1.0]",
            "--set", "experiment.n_seeds=1", *FAST_SETS,
        ])
        assert code == 0
        results = json.loads((out / "results.json").read_text())
        ratios = [r["setting"]["node_ratio"] for r in results["rows"]]
        assert ratios == [0.8, 1.0]


class TestGradcheckCommand:
    def test_passes_and_prints(self, capsys):
        assert cli.main(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert "overall max rel error" in out
        worst = float(out.strip().splitlines()[-1].split()[-1])
        assert worst < 1e-5


class TestConvertCheckCommand:
    def test_valid_dataset(self, toy_dataset_dir, capsys):
        assert cli.main(["convert-check", str(toy_dataset_dir)]) == 0
        assert "ok:" in capsys.readouterr().out

    def test_corrupt_dataset(self, toy_dataset_dir, capsys):
        labels = np.array([0, 0, 0, 1, 1, 9], dtype="<u4")
        (toy_dataset_dir / "labels.bin").write_bytes(labels.tobytes())
        assert cli.main(["convert-check", str(toy_dataset_dir)]) == 1
        assert "FAIL" in capsys.readouterr().err
