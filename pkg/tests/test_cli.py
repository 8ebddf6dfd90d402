"""Command-line interface tests: exit codes, config layering, manifests,
artifact determinism, and the sweep/ablation surface."""

import csv
import hashlib
import json
from pathlib import Path

import pytest

import nirrec.cli as cli
from nirrec.cli import DEFAULT_SWEEP_VALUES, main, parse_config_file
from nirrec.datagen import write_toy_dataset
from nirrec.errors import ConfigurationError, TrainingError
from nirrec.model import train as real_train


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    sessions, catalog = write_toy_dataset(root)
    return sessions, catalog


@pytest.fixture(scope="module")
def shards(tmp_path_factory, corpus):
    out = tmp_path_factory.mktemp("shards")
    sessions, catalog = corpus
    assert main(["prepare", str(sessions), str(catalog), "--out", str(out), "--seed", "0"]) == 0
    return out


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory, shards):
    out = tmp_path_factory.mktemp("run")
    argv = ["train", str(shards), "--out", str(out), "--epochs", "2", "--d", "16",
            "--seed", "3"]
    assert main(argv) == 0
    return out / "checkpoint.bin"


class TestConfigFile:
    """Flat key=value config parsing and flag > file > default layering."""

    def test_parses_values_and_ignores_comments(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nepochs = 4\n\nlambda=0.25  # trailing\n")
        assert parse_config_file(cfg) == {"epochs": "4", "lambda": "0.25"}

    def test_unknown_key_is_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mystery = 1\n")
        with pytest.raises(ConfigurationError, match="mystery"):
            parse_config_file(cfg)

    def test_missing_file_is_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            parse_config_file(tmp_path / "absent.cfg")

    def test_line_without_equals_is_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs 4\n")
        with pytest.raises(ConfigurationError, match="key=value"):
            parse_config_file(cfg)

    def test_flag_beats_file_beats_default(self, tmp_path, shards):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs = 4\ngamma = 0.7\n")
        out = tmp_path / "out"
        argv = ["train", str(shards), "--config", str(cfg), "--epochs", "2",
                "--d", "16", "--out", str(out)]
        assert main(argv) == 0
        config = json.loads((out / "manifest.json").read_text())["config"]
        assert config["epochs"] == 2
        assert config["gamma"] == 0.7
        assert config["lr"] == 1e-3


class TestExitCodes:
    """0 success, 2 ingestion, 3 training, 4 evaluation, 1 anything else."""

    def test_success_returns_zero(self, shards, checkpoint, tmp_path):
        argv = ["eval", str(shards), str(checkpoint), "--out", str(tmp_path / "e")]
        assert main(argv) == 0

    def test_missing_catalog_returns_two_and_names_file(self, corpus, tmp_path, capsys):
        sessions, _ = corpus
        missing = tmp_path / "nope.jsonl"
        argv = ["prepare", str(sessions), str(missing), "--out", str(tmp_path / "s")]
        assert main(argv) == 2
        assert "nope.jsonl" in capsys.readouterr().err

    def test_vocab_mismatch_returns_four(self, corpus, checkpoint, tmp_path):
        sessions, catalog = corpus
        rows = [json.loads(line) for line in Path(catalog).read_text().splitlines()]
        keep = {r["item"] for r in rows[:15]}
        small_cat = tmp_path / "cat.jsonl"
        small_cat.write_text("\n".join(json.dumps(r) for r in rows[:15]) + "\n")
        small_sess = tmp_path / "sess.jsonl"
        kept_lines = []
        for line in Path(sessions).read_text().splitlines():
            s = json.loads(line)
            s["events"] = [e for e in s["events"] if e["item"] in keep]
            if len(s["events"]) >= 2:
                kept_lines.append(json.dumps(s))
        small_sess.write_text("\n".join(kept_lines) + "\n")
        shards2 = tmp_path / "shards2"
        assert main(["prepare", str(small_sess), str(small_cat), "--out", str(shards2)]) == 0
        argv = ["eval", str(shards2), str(checkpoint), "--out", str(tmp_path / "e")]
        assert main(argv) == 4

    def test_training_error_returns_three(self, shards, tmp_path, monkeypatch):
        def explode(data, cfg, params=None, progress=None):
            raise TrainingError("session 'boom' produced a non-finite loss")

        monkeypatch.setattr(cli, "train", explode)
        argv = ["train", str(shards), "--out", str(tmp_path / "t"), "--epochs", "1"]
        assert main(argv) == 3

    def test_bad_config_key_returns_one(self, shards, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense = 3\n")
        argv = ["train", str(shards), "--config", str(cfg), "--out", str(tmp_path / "t")]
        assert main(argv) == 1

    def test_sweep_value_out_of_range_returns_one(self, shards, tmp_path):
        argv = ["sweep", str(shards), "--param", "lambda", "--values", "0.5,1.5",
                "--out", str(tmp_path / "s")]
        assert main(argv) == 1


class TestManifests:
    """Each command emits exactly one manifest tying outputs to inputs."""

    def test_train_manifest_contents(self, shards, tmp_path):
        out = tmp_path / "run"
        argv = ["train", str(shards), "--out", str(out), "--epochs", "1",
                "--d", "16", "--seed", "7"]
        assert main(argv) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["seed"] == 7
        assert manifest["threads"] == 1
        assert manifest["seconds"] > 0
        assert len(manifest["config_hash"]) == 64
        for path, digest in manifest["inputs"].items():
            assert sha(path) == digest
        for path in manifest["outputs"]:
            assert Path(path).exists()

    def test_input_digests_cover_shard_files(self, shards, tmp_path):
        out = tmp_path / "run"
        assert main(["train", str(shards), "--out", str(out), "--epochs", "1",
                     "--d", "16"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        names = {Path(p).name for p in manifest["inputs"]}
        assert {"shard.bin", "index.json"} <= names
        assert "manifest.json" not in names

    def test_each_command_writes_one_manifest(self, corpus, shards, checkpoint, tmp_path):
        sessions, catalog = corpus
        runs = {
            "prepare": ["prepare", str(sessions), str(catalog),
                        "--out", str(tmp_path / "p")],
            "eval": ["eval", str(shards), str(checkpoint), "--out", str(tmp_path / "e")],
            "ablate": ["ablate", str(shards), "--which", "no_lzero", "--epochs", "1",
                       "--d", "16", "--out", str(tmp_path / "a")],
            "sweep": ["sweep", str(shards), "--param", "gamma", "--values", "0.5",
                      "--epochs", "1", "--d", "16", "--out", str(tmp_path / "w")],
        }
        for command, argv in runs.items():
            assert main(argv) == 0, command
            found = list(Path(argv[-1]).rglob("manifest.json"))
            assert len(found) == 1, command
            assert json.loads(found[0].read_text())["command"] == command


class TestDeterminism:
    """Reruns over the same inputs and seed reproduce artifacts byte for byte."""

    def test_prepare_is_byte_deterministic(self, corpus, tmp_path):
        sessions, catalog = corpus
        for name in ("one", "two"):
            argv = ["prepare", str(sessions), str(catalog),
                    "--out", str(tmp_path / name), "--seed", "4"]
            assert main(argv) == 0
        assert sha(tmp_path / "one" / "shard.bin") == sha(tmp_path / "two" / "shard.bin")
        assert sha(tmp_path / "one" / "index.json") == sha(tmp_path / "two" / "index.json")

    def test_train_same_seed_same_checkpoint(self, shards, tmp_path):
        for name in ("one", "two"):
            argv = ["train", str(shards), "--out", str(tmp_path / name),
                    "--epochs", "2", "--d", "16", "--seed", "9"]
            assert main(argv) == 0
        assert sha(tmp_path / "one" / "checkpoint.bin") == sha(tmp_path / "two" / "checkpoint.bin")

    def test_train_seed_changes_checkpoint(self, shards, tmp_path):
        for name, seed in (("one", "9"), ("two", "10")):
            argv = ["train", str(shards), "--out", str(tmp_path / name),
                    "--epochs", "2", "--d", "16", "--seed", seed]
            assert main(argv) == 0
        assert sha(tmp_path / "one" / "checkpoint.bin") != sha(tmp_path / "two" / "checkpoint.bin")

    def test_eval_metrics_are_byte_deterministic(self, shards, checkpoint, tmp_path):
        for name in ("one", "two"):
            argv = ["eval", str(shards), str(checkpoint), "--out", str(tmp_path / name)]
            assert main(argv) == 0
        assert sha(tmp_path / "one" / "metrics.json") == sha(tmp_path / "two" / "metrics.json")
        assert sha(tmp_path / "one" / "rankings.csv") == sha(tmp_path / "two" / "rankings.csv")

    def test_lambda_one_flag_equals_no_beta_ablation(self, shards, tmp_path):
        base = ["--epochs", "2", "--d", "16", "--seed", "5"]
        argv_a = ["train", str(shards), "--out", str(tmp_path / "lam"),
                  "--lambda", "1.0", *base]
        argv_b = ["train", str(shards), "--out", str(tmp_path / "abl"),
                  "--ablate", "no_beta", *base]
        assert main(argv_a) == 0
        assert main(argv_b) == 0
        assert sha(tmp_path / "lam" / "checkpoint.bin") == sha(tmp_path / "abl" / "checkpoint.bin")


class TestPrepareOutput:
    """Dataset statistics echo what the shards record."""

    def test_stats_table_matches_index(self, corpus, tmp_path, capsys):
        sessions, catalog = corpus
        out = tmp_path / "shards"
        assert main(["prepare", str(sessions), str(catalog), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        stats = json.loads((out / "index.json").read_text())["stats"]
        assert f"Items            {stats['items']}" in printed
        assert f"Train sessions   {stats['train_sessions']}" in printed
        assert f"Test sessions    {stats['test_sessions']}" in printed
        assert "Average length" in printed

    def test_prepare_does_not_mutate_inputs(self, corpus, tmp_path):
        sessions, catalog = corpus
        before = (sha(sessions), sha(catalog))
        assert main(["prepare", str(sessions), str(catalog),
                     "--out", str(tmp_path / "s")]) == 0
        assert (sha(sessions), sha(catalog)) == before


class TestEvalCommand:
    def test_k_override_controls_metric_columns(self, shards, checkpoint, tmp_path):
        out = tmp_path / "e"
        argv = ["eval", str(shards), str(checkpoint), "--k", "1,5", "--out", str(out)]
        assert main(argv) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert set(metrics["p"]) == {"1", "5"}
        assert set(metrics["mrr"]) == {"1", "5"}

    def test_rankings_csv_has_one_row_per_session(self, shards, checkpoint, tmp_path):
        out = tmp_path / "e"
        assert main(["eval", str(shards), str(checkpoint), "--out", str(out)]) == 0
        with (out / "rankings.csv").open() as fh:
            rows = list(csv.reader(fh))
        metrics = json.loads((out / "metrics.json").read_text())
        assert rows[0] == ["session_id", "gt_item", "gt_rank", "top20"]
        assert len(rows) - 1 == metrics["sessions"]

    def test_metrics_table_is_printed(self, shards, checkpoint, tmp_path, capsys):
        assert main(["eval", str(shards), str(checkpoint),
                     "--out", str(tmp_path / "e")]) == 0
        printed = capsys.readouterr().out
        assert "P@k" in printed and "MRR@k" in printed

    def test_sampled_mode_reports_spread(self, shards, checkpoint, tmp_path):
        out = tmp_path / "e"
        argv = ["eval", str(shards), str(checkpoint), "--eval-mode", "sampled",
                "--repeats", "2", "--out", str(out)]
        assert main(argv) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert "p_std" in metrics and "mrr_std" in metrics


class TestSweep:
    def test_default_grid_has_five_sorted_rows(self, shards, tmp_path):
        out = tmp_path / "s"
        argv = ["sweep", str(shards), "--param", "lambda", "--epochs", "1",
                "--d", "16", "--out", str(out)]
        assert main(argv) == 0
        with (out / "plotdata.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["lambda", "p_at_20", "status"]
        values = [float(r[0]) for r in rows[1:]]
        assert values == sorted(values)
        assert tuple(values) == DEFAULT_SWEEP_VALUES
        assert all(r[2] == "ok" for r in rows[1:])

    def test_unsorted_custom_values_come_out_sorted(self, shards, tmp_path):
        out = tmp_path / "s"
        argv = ["sweep", str(shards), "--param", "gamma", "--values", "0.9,0.1",
                "--epochs", "1", "--d", "16", "--out", str(out)]
        assert main(argv) == 0
        with (out / "plotdata.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert [r[0] for r in rows[1:]] == ["0.1", "0.9"]

    def test_failed_value_keeps_partial_rows_and_propagates(self, shards, tmp_path,
                                                            monkeypatch):
        def sometimes(data, cfg, params=None, progress=None):
            if cfg.lambda_ > 0.8:
                raise TrainingError("session 's9' produced a non-finite loss")
            return real_train(data, cfg, params=params, progress=progress)

        monkeypatch.setattr(cli, "train", sometimes)
        out = tmp_path / "s"
        argv = ["sweep", str(shards), "--param", "lambda", "--values", "0.2,0.9",
                "--epochs", "1", "--d", "16", "--out", str(out)]
        assert main(argv) == 3
        with (out / "plotdata.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[1][0] == "0.2" and rows[1][2] == "ok" and rows[1][1] != ""
        assert rows[2][0] == "0.9" and rows[2][2].startswith("failed") and rows[2][1] == ""


class TestLogging:
    def test_log_levels_accepted(self, shards, checkpoint, tmp_path, monkeypatch):
        for level in ("error", "info", "debug", "bogus"):
            monkeypatch.setenv("NIRREC_LOG", level)
            argv = ["eval", str(shards), str(checkpoint),
                    "--out", str(tmp_path / f"e_{level}")]
            assert main(argv) == 0
