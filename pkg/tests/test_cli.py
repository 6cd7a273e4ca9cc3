import json

import numpy as np
import pytest

from lfdr_lab import mixture_model, sample_model
from lfdr_lab.cli import main


def write_z_file(path, z):
    path.write_text("# header comment\n" + "\n".join(repr(float(v)) for v in z) + "\n")


@pytest.fixture
def null_file(tmp_path):
    z, _ = sample_model(mixture_model(1.0, []), 1_000, 20)
    path = tmp_path / "null.txt"
    write_z_file(path, z)
    return path


@pytest.fixture
def mixture_file(tmp_path):
    model = mixture_model(0.8, [(0.1, -3.0, 1.0), (0.1, 3.0, 1.0)])
    z, _ = sample_model(model, 100_000, 21)
    path = tmp_path / "mix.txt"
    write_z_file(path, z)
    return path


def run(args):
    return main([str(a) for a in args])


class TestAnalyze:
    def test_null_file_bh_rejects_nothing(self, null_file, tmp_path, capsys):
        out = tmp_path / "dec.csv"
        code = run(["analyze", null_file, "--alpha", "0.10", "--procedure", "bh",
                    "--out", out, "--manifest", tmp_path / "m.json"])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "index,z,pvalue,lfdr_hat,reject"
        assert len(lines) == 1_001
        assert sum(1 for ln in lines[1:] if ln.endswith(",true")) == 0

    def test_single_zero_lfdr(self, tmp_path, capsys):
        path = tmp_path / "one.txt"
        path.write_text("0.0\n")
        code = run(["analyze", path, "--procedure", "lfdr",
                    "--manifest", tmp_path / "m.json"])
        assert code == 0
        lines = capsys.readouterr().out.strip().split("\n")
        idx, z, p, lf, rej = lines[1].split(",")
        assert float(lf) == 1.0 and rej == "false"

    def test_csv_input_with_z_column(self, tmp_path, capsys):
        path = tmp_path / "table.csv"
        path.write_text("gene,z\ng1,0.5\ng2,-4.2\ng3,1.0\n")
        code = run(["analyze", path, "--alpha", "0.05",
                    "--manifest", tmp_path / "m.json"])
        assert code == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 4
        assert lines[2].endswith(",true")  # z = -4.2 rejected

    def test_lfdr_rejects_more_true_nonnulls_asymmetric(self, tmp_path):
        # seeded end-to-end comparison on the asymmetric mixture
        model = mixture_model(0.8, [(0.18, -3.0, 1.0), (0.02, 6.0, 1.0)])
        z, nonnull = sample_model(model, 5_000, 22)
        path = tmp_path / "asym.txt"
        write_z_file(path, z)
        rejected = {}
        for proc in ("bh", "lfdr"):
            out = tmp_path / f"{proc}.csv"
            assert run(["analyze", path, "--alpha", "0.10", "--procedure", proc,
                        "--out", out, "--manifest", tmp_path / f"{proc}.json"]) == 0
            flags = [ln.endswith(",true") for ln in out.read_text().strip().split("\n")[1:]]
            rejected[proc] = np.array(flags)
        true_hits_bh = int((rejected["bh"] & nonnull).sum())
        true_hits_lfdr = int((rejected["lfdr"] & nonnull).sum())
        assert true_hits_lfdr >= true_hits_bh

    def test_estimated_null_end_to_end(self, mixture_file, tmp_path):
        out = tmp_path / "dec.csv"
        code = run(["analyze", mixture_file, "--alpha", "0.10",
                    "--procedure", "lfdr", "--null", "estimated",
                    "--out", out, "--manifest", tmp_path / "m.json"])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        rejected = sum(1 for ln in lines[1:] if ln.endswith(",true"))
        # with 20% nonnulls at +-3 and alpha 0.10, a sizable fraction of the
        # 100k hypotheses is rejected
        assert 10_000 <= rejected <= 25_000

    def test_estimated_null_needs_data(self, tmp_path):
        path = tmp_path / "tiny.txt"
        path.write_text("\n".join(str(v) for v in range(50)))
        assert run(["analyze", path, "--null", "estimated",
                    "--manifest", tmp_path / "m.json"]) == 3

    def test_malformed_input(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not,a,zfile\n1,2,3\n")
        assert run(["analyze", path, "--manifest", tmp_path / "m.json"]) == 2

    def test_missing_file(self, tmp_path):
        assert run(["analyze", tmp_path / "nope.txt"]) == 2

    def test_bad_alpha(self, null_file, tmp_path):
        assert run(["analyze", null_file, "--alpha", "1.5",
                    "--manifest", tmp_path / "m.json"]) == 4

    def test_replay_byte_identical(self, null_file, tmp_path):
        out = tmp_path / "dec.csv"
        manifest = tmp_path / "m.json"
        assert run(["analyze", null_file, "--alpha", "0.2", "--procedure", "abh",
                    "--out", out, "--manifest", manifest]) == 0
        first = out.read_bytes()
        out.unlink()
        assert run(["replay", manifest]) == 0
        assert out.read_bytes() == first


class TestOracle:
    def test_report_and_csv(self, tmp_path, capsys):
        csv_path = tmp_path / "rules.csv"
        code = run(["oracle", "--p0", "0.8",
                    "--components", "0.15:-3:1,0.05:4:1",
                    "--alpha", "0.10", "--csv", csv_path,
                    "--manifest", tmp_path / "m.json"])
        assert code == 0
        report = capsys.readouterr().out
        assert "p-value oracle rule" in report and "lfdr oracle rule" in report
        lines = csv_path.read_text().strip().split("\n")
        assert lines[0] == "kind,threshold,mfdr,mfnr,region"
        lfdr_line = lines[2].split(",")
        region = lfdr_line[4]
        assert region.count(";") == 1  # two intervals, asymmetric

    def test_pure_null_reports_infeasible_region(self, tmp_path, capsys):
        code = run(["oracle", "--p0", "1.0", "--alpha", "0.10",
                    "--manifest", tmp_path / "m.json"])
        assert code == 0
        assert "infeasible" in capsys.readouterr().out

    def test_symmetric_model_equal_mfnr(self, tmp_path, capsys):
        code = run(["oracle", "--p0", "0.8", "--components", "0.1:-3:1,0.1:3:1",
                    "--alpha", "0.10", "--csv", tmp_path / "r.csv",
                    "--manifest", tmp_path / "m.json"])
        assert code == 0
        lines = (tmp_path / "r.csv").read_text().strip().split("\n")
        mfnr_p = float(lines[1].split(",")[3])
        mfnr_l = float(lines[2].split(",")[3])
        assert abs(mfnr_p - mfnr_l) <= 1e-6

    def test_invalid_weights(self, tmp_path):
        assert run(["oracle", "--p0", "0.9", "--components", "0.2:3:1",
                    "--alpha", "0.10", "--manifest", tmp_path / "m.json"]) == 4

    def test_replay_byte_identical(self, tmp_path, capsys):
        csv_path = tmp_path / "rules.csv"
        manifest = tmp_path / "m.json"
        assert run(["oracle", "--p0", "0.9", "--components", "0.1:4:1",
                    "--alpha", "0.05", "--csv", csv_path, "--manifest", manifest]) == 0
        first = csv_path.read_bytes()
        csv_path.unlink()
        assert run(["replay", manifest]) == 0
        assert csv_path.read_bytes() == first


class TestSimulate:
    def test_figure1_panel_a(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"figure1": "a"}))
        outdir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 0
        lines = (outdir / "figure1_a.csv").read_text().strip().split("\n")
        assert lines[0] == "panel,sweep,mfnr_pvalue,mfnr_lfdr"
        assert len(lines) == 20  # header + 19 rows
        assert (outdir / "manifest.json").exists()

    def test_replication_study(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "p0": 0.8,
            "components": [[0.1, -3.0, 1.0], [0.1, 3.0, 1.0]],
            "m": 200, "reps": 10, "alpha": 0.1, "seed": 5,
            "procedures": ["bh", "adaptive_bh"],
        }))
        outdir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 0
        lines = (outdir / "replication.csv").read_text().strip().split("\n")
        assert lines[0] == "procedure,mfdr,mfdr_se,mfnr,mfnr_se,mean_rejections"
        assert len(lines) == 3

    def test_rerun_byte_identical(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "p0": 0.8, "components": "0.2:4:1", "m": 300, "reps": 5,
            "alpha": 0.1, "seed": 9, "procedures": ["bh"],
        }))
        outdir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 0
        first = (outdir / "replication.csv").read_bytes()
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 0
        assert (outdir / "replication.csv").read_bytes() == first

    def test_figure_string_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"figure": "concentrated"}))
        outdir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 0
        text = (outdir / "concentrated_report.txt").read_text()
        assert "nonnull fraction" in text

    def test_figure2_outputs(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"figure2": True}))
        outdir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 0
        assert (outdir / "figure2_curve.csv").exists()
        report = (outdir / "figure2_report.txt").read_text()
        assert "z = -2" in report and "z = 3" in report

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert run(["simulate", "--config", cfg, "--out", tmp_path / "o"]) == 2
        cfg.write_text(json.dumps({"p0": 0.8}))
        assert run(["simulate", "--config", cfg, "--out", tmp_path / "o"]) == 2

    def test_failed_run_removes_partial_outputs(self, tmp_path):
        # lfdr_estimated needs m >= 100; the run aborts and leaves no CSV
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "p0": 0.8, "components": "0.2:4:1", "m": 50, "reps": 2,
            "alpha": 0.1, "seed": 1, "procedures": ["lfdr_estimated"],
        }))
        outdir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 3
        assert not (outdir / "replication.csv").exists()
        assert not (outdir / "manifest.json").exists()

    def test_simulate_replay(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "p0": 0.8, "components": "0.2:4:1", "m": 100, "reps": 3,
            "alpha": 0.1, "seed": 10, "procedures": ["bh"],
        }))
        outdir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", outdir]) == 0
        first = (outdir / "replication.csv").read_bytes()
        (outdir / "replication.csv").unlink()
        assert run(["replay", outdir / "manifest.json"]) == 0
        assert (outdir / "replication.csv").read_bytes() == first


class TestEstimateNull:
    def test_pure_null_report(self, mixture_file, tmp_path, capsys):
        code = run(["estimate-null", mixture_file, "--manifest", tmp_path / "m.json"])
        assert code == 0
        out = capsys.readouterr().out
        assert "p0_hat" in out
        header_idx = out.index("p0_hat,u0_hat")
        values = out[header_idx:].strip().split("\n")[1].split(",")
        assert 0.75 <= float(values[0]) <= 0.85
        assert abs(float(values[2]) - 1.0) <= 0.05

    def test_not_enough_data(self, tmp_path):
        path = tmp_path / "few.txt"
        path.write_text("\n".join(["0.5"] * 10))
        assert run(["estimate-null", path, "--manifest", tmp_path / "m.json"]) == 3

    def test_constant_file_degenerate(self, tmp_path):
        path = tmp_path / "const.txt"
        path.write_text("\n".join(["2.5"] * 500))
        assert run(["estimate-null", path, "--manifest", tmp_path / "m.json"]) == 5
