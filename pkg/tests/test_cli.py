import json
import os

import pytest

from glintru.cli import main


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def tiny_tsv(tmp_path, capsys):
    path = str(tmp_path / "synth.tsv")
    code, out, _ = run_cli(capsys, [
        "synth", "--items", "12", "--users", "20", "--seq-len", "6",
        "--out", path])
    assert code == 0
    return path


TRAIN_FLAGS = ["--hidden-size", "8", "--heads", "2", "--max-seq-len", "6",
               "--max-epochs", "1", "--batch-size", "32"]


class TestBasicCommands:
    def test_synth_reports_stats(self, capsys):
        code, out, _ = run_cli(capsys, [
            "synth", "--items", "10", "--users", "5", "--seq-len", "4"])
        assert code == 0
        payload = json.loads(out)
        assert payload["command"] == "synth"
        assert payload["stats"]["num_users"] == 5

    def test_ingest_round_trip(self, tiny_tsv, capsys, tmp_path):
        manifest = str(tmp_path / "split.json")
        code, out, _ = run_cli(capsys, [
            "ingest", "--data", tiny_tsv, "--split-manifest", manifest])
        assert code == 0
        payload = json.loads(out)
        assert payload["stats"]["num_items"] == 12
        assert os.path.exists(manifest)

    def test_missing_data_file_is_runtime_error(self, capsys):
        code, out, err = run_cli(capsys, ["ingest", "--data", "/no/such.tsv"])
        assert code == 1
        assert "error" in err

    def test_usage_error_exit_2(self, tiny_tsv):
        # argparse handles missing required flags with SystemExit(2)
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", "--data", tiny_tsv])
        assert exc.value.code == 2

    def test_unknown_subcommand_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


class TestTrainEvaluate:
    def test_train_deterministic_stdout(self, tiny_tsv, capsys):
        argv = ["train", "--data", tiny_tsv, "--seed", "7"] + TRAIN_FLAGS
        code1, out1, _ = run_cli(capsys, argv)
        code2, out2, _ = run_cli(capsys, argv)
        assert code1 == code2 == 0
        assert out1 == out2
        payload = json.loads(out1)
        assert payload["epochs_run"] == 1
        assert payload["config"]["seed"] == 7

    def test_checkpoint_then_evaluate(self, tiny_tsv, capsys, tmp_path):
        ck = str(tmp_path / "ck")
        code, out, _ = run_cli(capsys, [
            "train", "--data", tiny_tsv, "--checkpoint-out", ck] + TRAIN_FLAGS)
        assert code == 0
        train_payload = json.loads(out)
        code, out, _ = run_cli(capsys, [
            "evaluate", "--data", tiny_tsv, "--checkpoint", ck] + TRAIN_FLAGS)
        assert code == 0
        eval_payload = json.loads(out)
        assert eval_payload["metrics"] == train_payload["test_metrics"]

    def test_rank_dump_written(self, tiny_tsv, capsys, tmp_path):
        ck = str(tmp_path / "ck")
        run_cli(capsys, ["train", "--data", tiny_tsv,
                         "--checkpoint-out", ck] + TRAIN_FLAGS)
        dump = str(tmp_path / "ranks.tsv")
        code, _, _ = run_cli(capsys, [
            "evaluate", "--data", tiny_tsv, "--checkpoint", ck,
            "--rank-dump", dump] + TRAIN_FLAGS)
        assert code == 0
        lines = open(dump).read().strip().splitlines()
        assert lines[0] == "user\ttarget\trank"
        assert len(lines) == 21  # header + one row per user

    def test_config_file_with_cli_override(self, tiny_tsv, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("hidden_size = 8\nheads = 2\nmax_seq_len = 6\n"
                       "max_epochs = 3\nbatch_size = 32\n# comment\n")
        code, out, _ = run_cli(capsys, [
            "train", "--data", tiny_tsv, "--config", str(cfg),
            "--max-epochs", "1"])
        assert code == 0
        payload = json.loads(out)
        assert payload["config"]["max_epochs"] == 1  # flag beats file
        assert payload["config"]["hidden_size"] == 8

    def test_unknown_config_key_rejected(self, tiny_tsv, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("hidden_size = 8\nnosuchkey = 1\n")
        code, _, err = run_cli(capsys, [
            "train", "--data", tiny_tsv, "--config", str(cfg)])
        assert code == 1
        assert "nosuchkey" in err


class TestReports:
    def test_bench_writes_csv_and_figure(self, capsys, tmp_path):
        out_dir = str(tmp_path / "bench")
        code, out, _ = run_cli(capsys, [
            "bench", "--components", "linear_attn", "--n-list", "8,16,32",
            "--d", "8", "--batch", "2", "--out-dir", out_dir])
        assert code == 0
        payload = json.loads(out)
        assert "linear_attn" in payload["loglog_slopes"]
        assert os.path.exists(os.path.join(out_dir, "scaling.csv"))
        assert os.path.exists(os.path.join(out_dir, "scaling.png"))

    def test_ablate_writes_outputs(self, tiny_tsv, capsys, tmp_path):
        out_dir = str(tmp_path / "abl")
        code, out, _ = run_cli(capsys, [
            "ablate", "--data", tiny_tsv, "--out-dir", out_dir] + TRAIN_FLAGS)
        assert code == 0
        payload = json.loads(out)
        assert len(payload["results"]) == 5
        assert os.path.exists(os.path.join(out_dir, "ablation.csv"))
        assert os.path.exists(os.path.join(out_dir, "ablation.png"))

    def test_sweep_writes_outputs(self, tiny_tsv, capsys, tmp_path):
        out_dir = str(tmp_path / "sw")
        code, out, _ = run_cli(capsys, [
            "sweep", "--data", tiny_tsv, "--axis", "k", "--values", "1,3",
            "--out-dir", out_dir] + TRAIN_FLAGS)
        assert code == 0
        payload = json.loads(out)
        assert [r["value"] for r in payload["rows"]] == [1, 3]
        assert os.path.exists(os.path.join(out_dir, "sweep_k.csv"))
        assert os.path.exists(os.path.join(out_dir, "sweep_k.png"))
