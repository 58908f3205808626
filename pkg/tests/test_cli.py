import csv
import json

import numpy as np
import pytest

import stochmor as sm
from stochmor.cli import _parse_input_spec, _parse_r_list, main


def run(argv):
    return main(argv)


class TestArgumentParsing:
    def test_r_list_forms(self):
        assert _parse_r_list("2,4,6") == [2, 4, 6]
        assert _parse_r_list("2:8:2") == [2, 4, 6, 8]
        assert _parse_r_list("4,2:3") == [2, 3, 4]
        with pytest.raises(ValueError):
            _parse_r_list("")

    def test_input_specs(self):
        u = _parse_input_spec("const:2.5")
        assert u(0.7) == 2.5
        u = _parse_input_spec("exp:-0.1")
        np.testing.assert_allclose(u(2.0), np.exp(-0.2))
        with pytest.raises(ValueError):
            _parse_input_spec("ramp:1")


class TestBuild:
    def test_build_and_reload(self, tmp_path):
        out = tmp_path / "model"
        assert run(["build", "--preset", "mult", "--n", "8",
                    "--out", str(out)]) == 0
        back = sm.load_model(out)
        direct = sm.build_wave_model(sm.preset_config("mult", n=8))
        np.testing.assert_allclose(back.A, direct.A, rtol=1e-15, atol=0)
        np.testing.assert_allclose(back.N[0], direct.N[0], rtol=1e-15, atol=0)

    def test_invalid_model_rejected(self, tmp_path, capsys):
        code = run(["build", "--model", str(tmp_path / "nope"),
                    "--out", str(tmp_path / "o")])
        assert code == 1
        record = json.loads(capsys.readouterr().err.strip())
        assert "error" in record and record["message"]


class TestReduceDistanceBounds:
    def test_multiplicative_pipeline(self, tmp_path):
        red = tmp_path / "red"
        assert run(["reduce", "--preset", "mult", "--n", "12",
                    "--algorithm", "bilinear_irka", "--r", "2",
                    "--out", str(red)]) == 0
        residuals = json.loads((red / "residuals.json").read_text())
        assert residuals["system"]["res_a"] < 1e-6

        dist = tmp_path / "dist"
        assert run(["distance", "--preset", "mult", "--n", "12",
                    "--reduced", str(red), "--out", str(dist)]) == 0
        report = json.loads((dist / "distance.json").read_text())
        assert report["distance"] >= 0.0

    def test_additive_two_step_bounds(self, tmp_path):
        red = tmp_path / "red"
        assert run(["reduce", "--preset", "add", "--n", "12",
                    "--algorithm", "two_step", "--r1", "4", "--r2", "2",
                    "--out", str(red)]) == 0
        assert (red / "part1" / "reduction.json").exists()
        assert (red / "part2" / "reduction.json").exists()

        bnd = tmp_path / "bnd"
        assert run(["bounds", "--preset", "add", "--n", "12",
                    "--reduced", str(red), "--out", str(bnd)]) == 0
        b = json.loads((bnd / "bounds.json").read_text())
        assert b["E1"] >= 0.0 and b["E2"] >= 0.0 and b["E3"] is None

    def test_incompatible_algorithm_fails_with_record(self, tmp_path, capsys):
        code = run(["reduce", "--preset", "mult", "--n", "8",
                    "--algorithm", "two_step", "--r", "2",
                    "--out", str(tmp_path / "x")])
        assert code == 1
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "ValueError"
        assert "two_step" in record["message"]


class TestSimulate:
    def test_end_to_end_pipeline(self, tmp_path):
        out = tmp_path / "sim"
        assert run(["simulate", "--preset", "add", "--n", "10",
                    "--algorithm", "one_step", "--r", "4",
                    "--dt", "1e-2", "--paths", "20",
                    "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["converged"] is True
        assert np.isfinite(summary["sup_mean_error"])
        assert summary["sup_mean_error"] >= 0.0
        assert (out / "bounds.csv").exists()
        with open(out / "mean_error_curve.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 101  # header + steps + 1 nodes
        assert (out / "trajectory_sample.csv").exists()

    def test_reruns_are_byte_identical(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert run(["simulate", "--preset", "mult", "--n", "8",
                        "--algorithm", "bilinear_irka", "--r", "2",
                        "--dt", "1e-2", "--paths", "10", "--seed", "3",
                        "--out", str(out)]) == 0
            outs.append(out)
        for name in ("mean_error_curve.csv", "trajectory_sample.csv",
                     "summary.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_reuse_saved_reduction(self, tmp_path):
        red = tmp_path / "red"
        assert run(["reduce", "--preset", "mult", "--n", "8",
                    "--algorithm", "bilinear_irka", "--r", "2",
                    "--out", str(red)]) == 0
        out = tmp_path / "sim"
        assert run(["simulate", "--preset", "mult", "--n", "8",
                    "--reduced", str(red), "--dt", "1e-2", "--paths", "10",
                    "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert "distance" in summary


class TestSweep:
    def test_rows_ordered_and_complete(self, tmp_path):
        out = tmp_path / "sweep"
        assert run(["sweep", "--preset", "add", "--n", "10",
                    "--algorithm", "one_step", "--r-list", "4,2",
                    "--skip-simulation", "--out", str(out)]) == 0
        with open(out / "sweep.csv", newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
        assert [int(r["r"]) for r in rows] == [2, 4]
        assert all(float(r["E1"]) >= 0.0 for r in rows)
        assert all(r["error"] == "" for r in rows)

    def test_failed_row_recorded_not_fatal(self, tmp_path):
        out = tmp_path / "sweep"
        assert run(["sweep", "--preset", "add", "--n", "10",
                    "--algorithm", "one_step", "--r-list", "2,50",
                    "--skip-simulation", "--out", str(out)]) == 0
        with open(out / "sweep.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        by_r = {int(r["r"]): r for r in rows}
        assert by_r[2]["error"] == ""
        assert "ValueError" in by_r[50]["error"]
        assert np.isnan(float(by_r[50]["E1"]))

    def test_sweep_reruns_byte_identical(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert run(["sweep", "--preset", "mult", "--n", "8",
                        "--algorithm", "bilinear_irka", "--r-list", "2,4",
                        "--dt", "1e-2", "--paths", "5", "--seed", "1",
                        "--out", str(out)]) == 0
            outs.append(out)
        # the runtime column differs between runs; compare all other columns
        for l1, l2 in zip((outs[0] / "sweep.csv").read_text().splitlines(),
                          (outs[1] / "sweep.csv").read_text().splitlines()):
            c1 = l1.split(",")
            c2 = l2.split(",")
            del c1[7], c2[7]
            assert c1 == c2
