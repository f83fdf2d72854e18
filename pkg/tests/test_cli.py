import json

import pytest

from locfit.cli import main
from locfit.data import save_dataset, synth_dataset_pair
from locfit.reports import (ALG_KNN, ALG_SIMO, RUNS_HEADER,
                            SUMMARY_HEADER, SWEEP_HEADER, read_summary_csv)

TINY_CONFIG = {
    "data": {"n_floors": 3},
    "sdae": {"hidden_dims": [16], "epochs_per_layer": 2, "batch_size": 32},
    "simo": {"common_hidden": 16, "floor_branch_hidden": 8,
             "coord_branch_hidden": 8},
    "siso": {"hidden": 16},
    "training": {"max_epochs": 3, "batch_size": 32},
}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    train_ds, test_ds = synth_dataset_pair(11, 24, 3, 120, 60)
    save_dataset(train_ds, root / "train.csv")
    save_dataset(test_ds, root / "test.csv")
    (root / "config.json").write_text(json.dumps(TINY_CONFIG))
    return root


def run_cli(*args):
    return main([str(a) for a in args])


def common_args(data_dir, out):
    return ["--train", data_dir / "train.csv", "--test", data_dir / "test.csv",
            "--config", data_dir / "config.json", "--out", out]


class TestTrainCommand:
    def test_simo_outputs(self, data_dir, tmp_path):
        out = tmp_path / "simo"
        code = run_cli("train", "--model", "simo", "--seeds", "3",
                       *common_args(data_dir, out))
        assert code == 0
        runs = (out / "runs.csv").read_text().splitlines()
        assert runs[0] == RUNS_HEADER
        assert len(runs) == 4
        assert [int(r.split(",")[0]) for r in runs[1:]] == [1, 2, 3]
        summary = read_summary_csv(out / "summary.csv")
        assert len(summary) == 1 and summary[0].algorithm == ALG_SIMO
        for seed in (1, 2, 3):
            assert (out / f"model_seed{seed}" / "manifest.json").is_file()
            assert (out / f"model_seed{seed}" / "weights.bin").is_file()
        assert (out / "logs" / "run_seed1.json").is_file()

    def test_siso_manifest_head_width_three(self, data_dir, tmp_path):
        out = tmp_path / "siso"
        code = run_cli("train", "--model", "siso", "--seeds", "2",
                       *common_args(data_dir, out))
        assert code == 0
        manifest = json.loads((out / "model_seed1" / "manifest.json").read_text())
        assert manifest["kind"] == "siso"
        assert manifest["layers"][-1]["out_dim"] == 3

    def test_missing_data_path_exits_2_no_outputs(self, data_dir, tmp_path):
        out = tmp_path / "missing"
        code = run_cli("train", "--model", "simo", "--seeds", "2",
                       "--train", data_dir / "nope.csv",
                       "--test", data_dir / "test.csv", "--out", out)
        assert code == 2
        assert not out.exists()

    def test_runs_csv_float_format(self, data_dir, tmp_path):
        out = tmp_path / "fmt"
        run_cli("train", "--model", "simo", "--seeds", "2",
                *common_args(data_dir, out))
        for line in (out / "runs.csv").read_text().splitlines()[1:]:
            for field in line.split(",")[3:]:
                whole, frac = field.split(".")
                assert len(frac) == 4

    def test_determinism_byte_identical_runs_csv(self, data_dir, tmp_path):
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        assert run_cli("train", "--model", "simo", "--seeds", "2",
                       *common_args(data_dir, out1)) == 0
        assert run_cli("train", "--model", "simo", "--seeds", "2",
                       *common_args(data_dir, out2)) == 0
        assert (out1 / "runs.csv").read_bytes() == (out2 / "runs.csv").read_bytes()
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()

    def test_inconsistent_nap_exits_3(self, data_dir, tmp_path):
        other_train, _ = synth_dataset_pair(1, 10, 3, 20, 5)
        bad = tmp_path / "bad_train.csv"
        save_dataset(other_train, bad)
        code = run_cli("train", "--model", "simo", "--seeds", "2",
                       "--train", bad, "--test", data_dir / "test.csv",
                       "--config", data_dir / "config.json",
                       "--out", tmp_path / "x")
        assert code == 3


class TestSweepCommand:
    def test_single_weight_matches_train_summary(self, data_dir, tmp_path):
        out_t = tmp_path / "train08"
        run_cli("train", "--model", "simo", "--seeds", "2",
                "--coord-weight", "0.8", *common_args(data_dir, out_t))
        out_s = tmp_path / "sweep08"
        code = run_cli("sweep", "--seeds", "2", "--weights", "0.8",
                       *common_args(data_dir, out_s))
        assert code == 0
        sweep_lines = (out_s / "sweep.csv").read_text().splitlines()
        assert sweep_lines[0] == SWEEP_HEADER
        assert len(sweep_lines) == 2
        train_line = (out_t / "summary.csv").read_text().splitlines()[1]
        # identical metric columns: sweep row = "0.8000," + metrics
        assert sweep_lines[1] == "0.8000," + train_line.split(",", 1)[1]

    def test_default_grid_twelve_rows_and_figures(self, data_dir, tmp_path):
        out = tmp_path / "grid"
        code = run_cli("sweep", "--seeds", "2", *common_args(data_dir, out))
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert len(lines) == 13
        weights = [line.split(",")[0] for line in lines[1:]]
        assert weights == ["0.1000", "0.2000", "0.3000", "0.4000", "0.5000",
                           "0.6000", "0.7000", "0.8000", "0.9000", "1.0000",
                           "1.5000", "2.0000"]
        for metric in ("mean_2d_m", "mean_3d_m", "floor_rate_pct"):
            svg = out / f"sweep_{metric}.svg"
            assert svg.is_file()
            assert svg.read_bytes().startswith(b"<?xml")

    def test_siso_reference_lines(self, data_dir, tmp_path):
        out_siso = tmp_path / "siso_ref"
        run_cli("train", "--model", "siso", "--seeds", "2",
                *common_args(data_dir, out_siso))
        out = tmp_path / "sweep_ref"
        code = run_cli("sweep", "--seeds", "2", "--weights", "0.5,1.0",
                       "--siso-ref", out_siso / "summary.csv",
                       *common_args(data_dir, out))
        assert code == 0
        assert (out / "sweep_mean_3d_m.svg").is_file()

    def test_malformed_weights_exits_2(self, data_dir, tmp_path):
        code = run_cli("sweep", "--seeds", "2", "--weights", "0.1,oops",
                       *common_args(data_dir, tmp_path / "x"))
        assert code == 2


class TestBaselineCommand:
    def test_summary_row(self, data_dir, tmp_path, capsys):
        out = tmp_path / "knn"
        code = run_cli("baseline", *common_args(data_dir, out))
        assert code == 0
        rows = read_summary_csv(out / "summary.csv")
        assert len(rows) == 1
        row = rows[0]
        assert row.algorithm == ALG_KNN
        assert row.ci_2d is None and row.ci_floor is None
        assert row.best_2d_m == row.mean_2d_m
        assert 0.0 <= row.floor_rate_pct <= 100.0
        # configuration is flagged in the printed report header
        assert "data=powed" in capsys.readouterr().out

    def test_deterministic(self, data_dir, tmp_path):
        out1, out2 = tmp_path / "k1", tmp_path / "k2"
        run_cli("baseline", *common_args(data_dir, out1))
        run_cli("baseline", *common_args(data_dir, out2))
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()

    def test_k_zero_exits_2(self, data_dir, tmp_path):
        code = run_cli("baseline", "--k", "0", *common_args(data_dir, tmp_path / "x"))
        assert code == 2


@pytest.fixture(scope="module")
def summaries(data_dir, tmp_path_factory):
    root = tmp_path_factory.mktemp("summaries")
    run_cli("train", "--model", "simo", "--seeds", "2", "--out", root / "simo",
            "--train", data_dir / "train.csv", "--test", data_dir / "test.csv",
            "--config", data_dir / "config.json")
    run_cli("train", "--model", "siso", "--seeds", "2", "--out", root / "siso",
            "--train", data_dir / "train.csv", "--test", data_dir / "test.csv",
            "--config", data_dir / "config.json")
    run_cli("baseline", "--out", root / "knn",
            "--train", data_dir / "train.csv", "--test", data_dir / "test.csv",
            "--config", data_dir / "config.json")
    return root


class TestReportCommand:
    def test_full_report_has_four_rows(self, summaries, tmp_path):
        out = tmp_path / "report"
        code = run_cli("report", "--simo", summaries / "simo" / "summary.csv",
                       "--siso", summaries / "siso" / "summary.csv",
                       "--knn", summaries / "knn" / "summary.csv",
                       "--out", out)
        assert code == 0
        md = (out / "report.md").read_text()
        body = [ln for ln in md.splitlines()
                if ln.startswith("|") and "---" not in ln and "Algorithm" not in ln]
        assert len(body) == 4
        assert any(ALG_SIMO in ln for ln in body)
        assert any("RSS clustering" in ln and "8.09" in ln for ln in body)
        assert (out / "comparison.svg").is_file()

    def test_knn_only_two_rows(self, summaries, tmp_path):
        out = tmp_path / "knn_only"
        code = run_cli("report", "--knn", summaries / "knn" / "summary.csv",
                       "--out", out)
        assert code == 0
        body = [ln for ln in (out / "report.md").read_text().splitlines()
                if ln.startswith("|") and "---" not in ln and "Algorithm" not in ln]
        assert len(body) == 2

    def test_duplicate_rows_error(self, summaries, tmp_path):
        code = run_cli("report", "--simo", summaries / "simo" / "summary.csv",
                       "--siso", summaries / "simo" / "summary.csv",
                       "--out", tmp_path / "dup")
        assert code == 3

    def test_no_inputs_exits_2(self, tmp_path):
        assert run_cli("report", "--out", tmp_path / "r") == 2

    def test_missing_input_exits_2(self, tmp_path):
        assert run_cli("report", "--knn", tmp_path / "ghost.csv",
                       "--out", tmp_path / "r") == 2

    def test_corrupt_summary_exits_3(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(SUMMARY_HEADER + "\nalgo,1.0,oops,2.0,n/a,3.0,n/a,1.0,2.0,3.0\n")
        assert run_cli("report", "--knn", bad, "--out", tmp_path / "r") == 3


class TestSynthCommand:
    def test_generates_canonical_pair(self, tmp_path):
        out = tmp_path / "synth"
        code = run_cli("synth", "--out", out, "--n-ap", "6", "--n-floors", "2",
                       "--n-train", "30", "--n-test", "10")
        assert code == 0
        header = (out / "train.csv").read_text().splitlines()[0]
        assert header.endswith("X,Y,Z")
        from locfit.data import load_dataset
        assert len(load_dataset(out / "train.csv", n_floors=2)) == 30
        assert len(load_dataset(out / "test.csv", n_floors=2)) == 10


def test_summary_header_schema():
    assert SUMMARY_HEADER == ("algorithm,mean_2d_m,ci_2d,mean_3d_m,ci_3d,"
                              "floor_rate_pct,ci_floor,best_2d_m,best_3d_m,"
                              "best_floor_pct")
    assert RUNS_HEADER == "seed,best_epoch,epochs_run,mean_2d_m,mean_3d_m,floor_rate_pct"
