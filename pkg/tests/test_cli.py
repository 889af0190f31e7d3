import json
import subprocess
import sys

import numpy as np
import pytest

from doublevq import cli, datasets, dvq
from doublevq.series import TimeSeries

SINE = ["--generate", "sine_noise", "--length", "1200", "--gen-seed", "1"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def read(path):
    return path.read_bytes()


@pytest.fixture
def sine_model(tmp_path):
    out = tmp_path / "fit"
    assert run("fit", *SINE, "--offsets", "0,1", "--n1", 10, "--n2", 10,
               "--out-dir", out) == cli.EXIT_OK
    return out / "model.json"


class TestFit:
    def test_writes_model_with_stochastic_rows(self, sine_model):
        model = dvq.DvqModel.loads(sine_model.read_text())
        rows = model.transition.rows[model.transition.supported]
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-9)
        report = json.loads((sine_model.parent / "fit_report.json").read_text())
        assert report["n1"] == 10 and report["max_row_sum_error"] <= 1e-9

    def test_short_series_is_data_error(self, tmp_path, capsys):
        code = run("fit", "--generate", "sine_noise", "--length", 5,
                   "--offsets", "0,1,2,3,5,6", "--out-dir", tmp_path)
        assert code == cli.EXIT_DATA
        assert "at least 8 values" in capsys.readouterr().err

    def test_lag_shape_with_omitted_value(self, tmp_path):
        run("fit", *SINE, "--offsets", "0-3,5,6", "--n1", 4, "--n2", 4, "--out-dir", tmp_path)
        doc = json.loads((tmp_path / "model.json").read_text())
        assert doc["spec"]["offsets"] == [0, 1, 2, 3, 5, 6]
        assert doc["reg_codebook"]["p"] == 6

    def test_fit_from_csv(self, tmp_path):
        path = tmp_path / "x.csv"
        datasets.save_csv(TimeSeries(np.sin(np.arange(300) / 3)), path)
        assert run("fit", "--input", path, "--n1", 3, "--n2", 3,
                   "--out-dir", tmp_path / "o") == cli.EXIT_OK


class TestExitCodes:
    def test_no_command(self):
        assert run() == cli.EXIT_USAGE

    def test_unknown_flag(self):
        assert run("fit", "--bogus") == cli.EXIT_USAGE

    def test_bad_split(self, tmp_path):
        assert run("fit", *SINE, "--split", "a,b,c", "--out-dir", tmp_path) == cli.EXIT_USAGE

    def test_missing_input(self, tmp_path):
        assert run("fit", "--out-dir", tmp_path) == cli.EXIT_USAGE

    def test_malformed_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1\nabc\n")
        assert run("fit", "--input", path, "--out-dir", tmp_path) == cli.EXIT_DATA

    def test_corrupt_model_names_field(self, tmp_path, sine_model, capsys):
        doc = json.loads(sine_model.read_text())
        del doc["reg_codebook"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run("forecast", "--model", bad, *SINE, "--out-dir", tmp_path) == cli.EXIT_DATA
        assert "reg_codebook" in capsys.readouterr().err

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("format_version: 1\nwhat: 3\n")
        assert run("fit", "--config", cfg) == cli.EXIT_USAGE

    def test_entry_point_module(self):
        proc = subprocess.run([sys.executable, "-m", "doublevq.cli", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "doublevq" in proc.stdout


class TestSweep:
    def test_two_by_two_grid(self, tmp_path, capsys):
        code = run("sweep", *SINE, "--offsets", "0,1", "--n1-grid", "2,4", "--n2-grid", "2,4",
                   "--val-horizon", 20, "--val-paths", 10, "--out-dir", tmp_path)
        assert code == cli.EXIT_OK
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "n1,n2,sse,status" and len(lines) == 5
        out = capsys.readouterr().out
        best = out.split("best: ")[1].split(" sse")[0]
        n1, n2 = (int(part.split("=")[1]) for part in best.split())
        assert f"best: n1={n1} n2={n2}" in (tmp_path / "sweep.svg").read_text()
        assert 'id="best"' in (tmp_path / "sweep.svg").read_text()
        assert (tmp_path / "model.json").exists()

    def test_config_file_and_flag_override(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(
            "format_version: 1\n"
            "input: {generate: {kind: sine_noise, n: 1200, seed: 1}}\n"
            "lag: {d: 1, offsets: [0, 1]}\n"
            "grid: {n1: '2:4:2', n2: [2, 4], horizon: 20, paths: 10}\n"
            "seed: 4\n")
        assert run("sweep", "--config", cfg, "--n2-grid", "3", "--out-dir", tmp_path) == 0
        rows = (tmp_path / "sweep.csv").read_text().splitlines()[1:]
        assert [r.split(",")[:2] for r in rows] == [["2", "3"], ["4", "3"]]


class TestForecast:
    def test_ensemble_shape_and_determinism(self, tmp_path, sine_model):
        args = ["forecast", "--model", sine_model, *SINE, "--origin", 1000,
                "--horizon", 100, "--paths", 1000]
        assert run(*args, "--out-dir", tmp_path / "a") == 0
        assert run(*args, "--out-dir", tmp_path / "b") == 0
        lines = (tmp_path / "a" / "ensemble.csv").read_text().splitlines()
        assert len(lines) == 1001 and len(lines[1].split(",")) == 100
        for name in ("ensemble.csv", "summary.csv", "forecast.svg"):
            assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)

    def test_deterministic_model_has_zero_band(self, tmp_path):
        path = tmp_path / "step.csv"
        datasets.save_csv(TimeSeries(np.arange(200) % 2), path)
        run("fit", "--input", path, "--n1", 2, "--n2", 2, "--out-dir", tmp_path)
        run("forecast", "--model", tmp_path / "model.json", "--input", path,
            "--horizon", 10, "--paths", 20, "--out-dir", tmp_path)
        rows = (tmp_path / "summary.csv").read_text().splitlines()[1:]
        assert all(float(r.split(",")[3]) == float(r.split(",")[4]) for r in rows)

    def test_svg_contents(self, tmp_path, sine_model):
        run("forecast", "--model", sine_model, *SINE, "--split", "0.6,0.2,0.2",
            "--horizon", 30, "--paths", 50, "--out-dir", tmp_path)
        text = (tmp_path / "forecast.svg").read_text()
        for element in ('id="band"', 'id="mean"', 'id="truth"', "horizon step"):
            assert element in text


class TestStability:
    def test_sine_model_passes(self, tmp_path, sine_model, capsys):
        code = run("stability", "--model", sine_model, *SINE, "--horizon", 50, "--paths", 20,
                   "--steps", 2000, "--out-dir", tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "stability.json").read_text())
        assert doc["drift"]["all_boundary_pass"] is True
        for occ in doc["occupancy"]:
            assert abs(sum(occ["frequencies"]) - 1.0) <= 1e-9
        assert "verdict" in capsys.readouterr().out

    def test_zero_deformation_warns(self, tmp_path, capsys):
        path = tmp_path / "flat.csv"
        datasets.save_csv(TimeSeries(np.full(100, 2.0)), path)
        run("fit", "--input", path, "--n1", 3, "--n2", 2, "--out-dir", tmp_path)
        assert run("stability", "--model", tmp_path / "model.json", "--input", path,
                   "--horizon", 5, "--paths", 3, "--steps", 50, "--out-dir", tmp_path) == 0
        doc = json.loads((tmp_path / "stability.json").read_text())
        verdicts = {c["verdict"] for c in doc["drift"]["clusters"] if c["boundary"]}
        assert verdicts == {"WARN"}


def test_jobs_do_not_change_any_output(tmp_path):
    common = [*SINE, "--seed", 3]
    for jobs in (1, 8):
        out = tmp_path / f"j{jobs}"
        assert run("sweep", *common, "--offsets", "0,1,2", "--n1-grid", "3,6", "--n2-grid", "3,6",
                   "--val-horizon", 20, "--val-paths", 20, "--jobs", jobs, "--out-dir", out) == 0
        assert run("forecast", "--model", out / "model.json", *common, "--horizon", 40,
                   "--paths", 64, "--jobs", jobs, "--out-dir", out) == 0
    for name in ("sweep.csv", "sweep.svg", "model.json", "ensemble.csv", "summary.csv",
                 "forecast.svg"):
        assert read(tmp_path / "j1" / name) == read(tmp_path / "j8" / name), name


def test_generate_writes_csv(tmp_path):
    assert run("generate", "--kind", "logistic", "--length", 4, "--param", "x0=0.5",
               "--out-dir", tmp_path) == 0
    assert datasets.load_csv(tmp_path / "series.csv").values.tolist() == [0.5, 1.0, 0.0, 0.0]
