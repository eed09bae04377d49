import json

import numpy as np
import pytest

from pfdca.cli import main
from pfdca.sweep import CSV_HEADER, read_points_csv


def run_cli(*args):
    return main([str(a) for a in args])


class TestSolve:
    def test_defaults_write_valid_json(self, tmp_path, demo_dist_file):
        out = tmp_path / "result.json"
        rc = run_cli("solve", "--dist", demo_dist_file, "--out", out)
        assert rc == 0
        payload = json.loads(out.read_text())
        enc = np.array(payload["encoder"])
        assert enc.shape == (3, 3)
        assert np.allclose(enc.sum(axis=0), 1.0, atol=1e-9)
        assert payload["converged"] is True
        assert payload["q"] == 2 and payload["beta"] == 1.0 and payload["alpha"] == 1.0
        diffs = np.diff(payload["loss_trace"])
        assert diffs.size == 0 or diffs.max() <= 1e-6

    def test_single_code_symbol(self, tmp_path, demo_dist_file):
        out = tmp_path / "result.json"
        rc = run_cli("solve", "--dist", demo_dist_file, "--out", out, "--card-z", 1)
        assert rc == 0
        payload = json.loads(out.read_text())
        assert abs(payload["i_zx_bits"]) < 1e-12

    def test_missing_file_is_input_error(self, tmp_path):
        rc = run_cli("solve", "--dist", tmp_path / "nope.json", "--out", tmp_path / "o.json")
        assert rc == 1

    def test_malformed_json_is_input_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = run_cli("solve", "--dist", bad, "--out", tmp_path / "o.json")
        assert rc == 1

    def test_bad_flag_value(self, tmp_path, demo_dist_file):
        rc = run_cli("solve", "--dist", demo_dist_file, "--out", tmp_path / "o.json", "--q", 3)
        assert rc == 2

    def test_negative_beta_is_flag_error(self, tmp_path, demo_dist_file):
        rc = run_cli(
            "solve", "--dist", demo_dist_file, "--out", tmp_path / "o.json", "--beta", -1.0
        )
        assert rc == 2

    def test_unknown_override_key(self, tmp_path, demo_dist_file):
        rc = run_cli(
            "solve", "--dist", demo_dist_file, "--out", tmp_path / "o.json",
            "--set", "not_a_field=1",
        )
        assert rc == 2

    def test_iteration_cap_exit_code(self, tmp_path, demo_dist_file):
        rc = run_cli(
            "solve", "--dist", demo_dist_file, "--out", tmp_path / "o.json",
            "--max-iter", 1, "--beta", 3.0, "--seed", 2,
        )
        assert rc == 3


class TestSweep:
    ARGS = (
        "--set", "beta_grid=0.1,1,10",
        "--set", "alpha_grid=0.5,2",
        "--set", "card_z_values=2,3",
        "--restarts", 1,
    )

    def test_outputs(self, tmp_path, demo_dist_file):
        out = tmp_path / "sweep.csv"
        rc = run_cli("sweep", "--dist", demo_dist_file, "--out", out, *self.ARGS)
        assert rc == 0
        points = read_points_csv(out)
        assert len(points) == 3 * 2 * 2
        assert (tmp_path / "sweep.csv.json").exists()
        frontier = read_points_csv(tmp_path / "sweep.csv.frontier.csv")
        assert 0 < len(frontier) <= len(points)
        mirror = json.loads((tmp_path / "sweep.csv.json").read_text())
        assert len(mirror) == len(points)
        assert set(mirror[0]) == set(CSV_HEADER)

    def test_byte_identical_reruns_across_thread_counts(
        self, tmp_path, demo_dist_file, monkeypatch
    ):
        outs = []
        for name, threads in (("a.csv", "1"), ("b.csv", "2")):
            monkeypatch.setenv("PF_THREADS", threads)
            out = tmp_path / name
            assert run_cli("sweep", "--dist", demo_dist_file, "--out", out, *self.ARGS) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestBaseline:
    def test_greedy_row_count(self, tmp_path, demo_dist_file):
        out = tmp_path / "g.csv"
        rc = run_cli("baseline", "--dist", demo_dist_file, "--out", out, "--solver", "greedy")
        assert rc == 0
        assert len(read_points_csv(out)) == 3

    def test_exhaustive_row_count(self, tmp_path, demo_dist_file):
        out = tmp_path / "e.csv"
        rc = run_cli(
            "baseline", "--dist", demo_dist_file, "--out", out, "--solver", "exhaustive"
        )
        assert rc == 0
        assert len(read_points_csv(out)) == 5

    def test_both_default(self, tmp_path, demo_dist_file):
        out = tmp_path / "b.csv"
        assert run_cli("baseline", "--dist", demo_dist_file, "--out", out) == 0
        assert len(read_points_csv(out)) == 8

    def test_guard_exit_code(self, tmp_path):
        n = 13
        dist = tmp_path / "big.json"
        dist.write_text(
            json.dumps({"p_x": [1.0 / n] * n, "p_y_given_x": np.eye(n).tolist()})
        )
        rc = run_cli("baseline", "--dist", dist, "--out", tmp_path / "o.csv", "--solver", "exhaustive")
        assert rc == 4


class TestVerify:
    def test_passes_on_demo(self, tmp_path, demo_dist_file, capsys):
        out = tmp_path / "checks.jsonl"
        rc = run_cli("verify", "--dist", demo_dist_file, "--out", out)
        assert rc == 0
        lines = [json.loads(l) for l in out.read_text().strip().split("\n")]
        assert len(lines) == 9
        assert all(rec["passed"] for rec in lines)
        stdout = capsys.readouterr().out
        assert stdout.count("[PASS]") == 9

    def test_corrupted_distribution(self, tmp_path):
        dist = tmp_path / "bad.json"
        dist.write_text(
            json.dumps({"p_x": [0.5, 0.5], "p_y_given_x": [[0.5, 0.5], [0.4, 0.4]]})
        )
        rc = run_cli("verify", "--dist", dist, "--out", tmp_path / "o.jsonl")
        assert rc == 1

    def test_absurd_tolerance_fails(self, tmp_path, demo_dist_file):
        out = tmp_path / "checks.jsonl"
        rc = run_cli(
            "verify", "--dist", demo_dist_file, "--out", out, "--set", "residual_tol=1e-30"
        )
        assert rc == 5


class TestReport:
    @pytest.fixture
    def result_files(self, tmp_path, demo_dist_file):
        sweep = tmp_path / "sweep.csv"
        base = tmp_path / "base.csv"
        assert run_cli("sweep", "--dist", demo_dist_file, "--out", sweep, *TestSweep.ARGS) == 0
        assert run_cli("baseline", "--dist", demo_dist_file, "--out", base) == 0
        return sweep, base

    def test_merges_and_summarizes(self, tmp_path, result_files, capsys):
        sweep, base = result_files
        out = tmp_path / "combined.csv"
        rc = run_cli("report", "--inputs", sweep, base, "--out", out)
        assert rc == 0
        frontier = read_points_csv(out)
        assert frontier
        dom_lines = (tmp_path / "combined.csv.dominance.csv").read_text().strip().split("\n")
        assert len(dom_lines) == 1 + 8  # header + baseline points
        assert "baseline points dominated" in capsys.readouterr().out

    def test_single_file(self, tmp_path, result_files):
        sweep, _ = result_files
        out = tmp_path / "single.csv"
        assert run_cli("report", "--inputs", sweep, "--out", out) == 0
        assert read_points_csv(out)

    def test_empty_inputs_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text(",".join(CSV_HEADER) + "\n")
        rc = run_cli("report", "--inputs", empty, "--out", tmp_path / "o.csv")
        assert rc == 1

    def test_schema_mismatch_rejected(self, tmp_path, result_files):
        sweep, _ = result_files
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        rc = run_cli("report", "--inputs", sweep, bad, "--out", tmp_path / "o.csv")
        assert rc == 1
