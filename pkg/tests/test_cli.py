#!/usr/bin/env python3
"""
End-to-end tests of the spddsmbn command line: artifacts and exit codes.
"""

import json
import os

import pytest

from common.config import config as console_config
from common.exceptions import ConfigError, ExitCode
from spddsmbn import main
from workflows import WorkflowFactory
from workflows.factory import Command


def write_config(directory, data, name="run.json"):
    path = directory / name
    path.write_text(json.dumps(data))
    return str(path)


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class TestWorkflowFactory:
    def test_every_command_registered(self):
        assert WorkflowFactory.get_available_commands() == ["gen", "train", "eval", "ablate", "converge",
                                                            "gradcheck"]

    def test_create_by_name_and_enum(self):
        assert WorkflowFactory.create_workflow("train").name == "train"
        assert WorkflowFactory.create_workflow(Command.CONVERGE).default_dir == "convergence"

    def test_unknown_command(self):
        with pytest.raises(ConfigError) as excinfo:
            WorkflowFactory.create_workflow("deploy")
        assert "Available commands" in str(excinfo.value)
        assert not WorkflowFactory.is_command_supported("deploy")


class TestPipeline:
    def test_generate_train_evaluate(self, tmp_path, tiny_run_dict):
        data_dir, train_dir, eval_dir = tmp_path / "data", tmp_path / "train", tmp_path / "eval"
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["gen", "--config", config, "--out", str(data_dir)]) == ExitCode.SUCCESS
        assert (data_dir / "manifest.json").is_file()
        assert (data_dir / "domain_004.tsr").is_file()

        tiny_run_dict["paths"] = {"dataset": str(data_dir)}
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["train", "--config", config, "--out", str(train_dir)]) == ExitCode.SUCCESS
        log = read_json(train_dir / "training_log.json")
        assert log["seed"] == 0
        assert len(log["config_hash"]) == 16
        assert log["run_config"]["paths"]["dataset"] == str(data_dir)
        assert len(log["log"]["epochs"]) == 2
        assert (train_dir / "checkpoint.spdc").is_file()
        assert not (train_dir / ".spddsmbn.lock").exists()

        tiny_run_dict["paths"]["checkpoint"] = str(train_dir / "checkpoint.spdc")
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["eval", "--config", config, "--out", str(eval_dir)]) == ExitCode.SUCCESS
        report = read_json(eval_dir / "eval_report.json")
        assert [d["domain_id"] for d in report["domains"]] == [3, 4]
        assert all(d["labels_read_after_prediction"] for d in report["domains"])
        assert report["checkpoint_config_hash"] == log["config_hash"]
        assert 0.0 <= report["mean_balanced_accuracy"] <= 1.0

    def test_eval_finds_checkpoint_in_output_dir(self, tmp_path, tiny_run_dict):
        config = write_config(tmp_path, tiny_run_dict)
        out = str(tmp_path / "run")
        assert main(["train", "--config", config, "--out", out]) == ExitCode.SUCCESS
        assert main(["eval", "--config", config, "--out", out]) == ExitCode.SUCCESS
        assert os.path.isfile(os.path.join(out, "eval_report.json"))

    def test_seed_override_is_recorded(self, tmp_path, tiny_run_dict):
        tiny_run_dict["protocol"]["epochs"] = 1
        config = write_config(tmp_path, tiny_run_dict)
        out = tmp_path / "train"
        assert main(["train", "--config", config, "--out", str(out), "--seed-override", "4"]) == ExitCode.SUCCESS
        log = read_json(out / "training_log.json")
        assert log["seed"] == 4
        assert log["run_config"]["seed"] == 4

    def test_converge_writes_traces(self, tmp_path, tiny_run_dict):
        config = write_config(tmp_path, tiny_run_dict)
        out = tmp_path / "conv"
        assert main(["converge", "--config", config, "--out", str(out)]) == ExitCode.SUCCESS
        report = read_json(out / "convergence.json")
        assert report["decaying"]["steps"] == 50
        assert report["fixed"]["replicates"] == 4
        assert (out / "trace_decaying_momentum.csv").is_file()
        assert (out / "trace_fixed_momentum.csv").is_file()

    def test_converge_records_failed_check_and_exits_zero(self, tmp_path, tiny_run_dict, monkeypatch, capsys):
        monkeypatch.setattr(console_config, "_log_level", "info")
        tiny_run_dict["experiment"] = {"kind": "decaying", "dim": 3, "steps": 1, "seeds": 2,
                                       "dataset_size": 100, "dispersion": 2.0}
        config = write_config(tmp_path, tiny_run_dict)
        out = tmp_path / "conv"
        assert main(["converge", "--config", config, "--out", str(out)]) == ExitCode.SUCCESS
        report = read_json(out / "convergence.json")
        assert report["decaying"]["passed"] is False
        assert report["fixed"] is None
        assert "WARNING: At least one convergence check did not hold" in capsys.readouterr().err

    def test_ablate_writes_table(self, tmp_path, tiny_run_dict):
        tiny_run_dict["ablation"]["arms"] = ["spddsmbn", "spdmbn_no_ds"]
        tiny_run_dict["protocol"]["epochs"] = 1
        config = write_config(tmp_path, tiny_run_dict)
        out = tmp_path / "ablation"
        assert main(["ablate", "--config", config, "--out", str(out)]) == ExitCode.SUCCESS
        table = read_json(out / "ablation.json")
        assert [row["arm"] for row in table["rows"]] == ["spddsmbn", "spdmbn_no_ds"]
        text = (out / "ablation.txt").read_text()
        assert text.splitlines()[0].split() == ["arm", "delta_bacc_pp", "fit_time_s"]

    def test_gradcheck_reports_every_component(self, tmp_path, tiny_run_dict):
        config = write_config(tmp_path, tiny_run_dict)
        out = tmp_path / "grad"
        assert main(["gradcheck", "--config", config, "--out", str(out)]) == ExitCode.SUCCESS
        report = read_json(out / "gradcheck.json")
        assert report["passed"]
        assert any(row["name"] == "model.spddsmbn" for row in report["rows"])


class TestExitCodes:
    def test_unknown_config_key(self, tmp_path, tiny_run_dict):
        tiny_run_dict["protocol"]["learning_rate"] = 0.1
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["gen", "--config", config, "--out", str(tmp_path / "out")]) == ExitCode.INVALID_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["gen", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "out")]) == ExitCode.MISSING_FILE

    def test_malformed_config_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"seed\": ")
        assert main(["gen", "--config", str(path), "--out", str(tmp_path / "out")]) == ExitCode.FORMAT_MISMATCH

    def test_eval_without_checkpoint(self, tmp_path, tiny_run_dict):
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["eval", "--config", config, "--out", str(tmp_path / "empty")]) == ExitCode.MISSING_FILE

    def test_corrupt_checkpoint(self, tmp_path, tiny_run_dict):
        checkpoint = tmp_path / "bad.spdc"
        checkpoint.write_bytes(b"SPDX" + bytes(16))
        tiny_run_dict["paths"] = {"checkpoint": str(checkpoint)}
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["eval", "--config", config, "--out", str(tmp_path / "out")]) == ExitCode.FORMAT_MISMATCH

    def test_locked_output_directory(self, tmp_path, tiny_run_dict):
        out = tmp_path / "busy"
        out.mkdir()
        (out / ".spddsmbn.lock").write_text("12345")
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["gen", "--config", config, "--out", str(out)]) == ExitCode.OUTPUT_LOCKED
        assert not (out / "manifest.json").exists()

    def test_unknown_command_is_a_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["deploy"])
        assert excinfo.value.code == 2

    def test_threads_flag_pins_blas(self, tmp_path, tiny_run_dict, monkeypatch):
        for name in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            monkeypatch.setenv(name, "1")
        config = write_config(tmp_path, tiny_run_dict)
        assert main(["gen", "--config", config, "--out", str(tmp_path / "out"), "--threads", "3"]) == 0
        assert os.environ["OMP_NUM_THREADS"] == "3"
