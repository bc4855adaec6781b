import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from gccabss.cli import main
from gccabss.signals import REFERENCE_MIXING_MATRIX, SignalMatrix, read_matrix_csv, row_normalize, write_matrix_csv


@pytest.fixture
def workdir(tmp_path):
    assert main(["generate", "--length", "6000", "--seed", "1", "--out", str(tmp_path / "s.csv")]) == 0
    assert main(["mix", "--sources", str(tmp_path / "s.csv"), "--row-normalize", "--noise-variance", "0.09",
                 "--seed", "2", "--out", str(tmp_path / "x.csv"), "--matrix-out", str(tmp_path / "A.csv")]) == 0
    return tmp_path


def test_generate_and_mix(workdir):
    s = SignalMatrix.from_csv(workdir / "s.csv")
    x = SignalMatrix.from_csv(workdir / "x.csv")
    assert s.data.shape == x.data.shape == (3, 6000)
    np.testing.assert_allclose(read_matrix_csv(workdir / "A.csv"), row_normalize(REFERENCE_MIXING_MATRIX), atol=1e-15)


def test_generate_custom_filters(tmp_path):
    (tmp_path / "f.json").write_text(json.dumps([{"kind": "ar", "coefficients": [0.5]}]))
    assert main(["generate", "--filters", str(tmp_path / "f.json"), "--length", "100", "--out", str(tmp_path / "o.csv")]) == 0
    assert SignalMatrix.from_csv(tmp_path / "o.csv").channel_count == 1


def test_solve_pencil(tmp_path, capsys):
    write_matrix_csv(tmp_path / "n.csv", np.diag([2.0, 1.0]))
    write_matrix_csv(tmp_path / "d.csv", np.eye(2))
    assert main(["solve-pencil", "--numerator", str(tmp_path / "n.csv"), "--denominator", str(tmp_path / "d.csv")]) == 0
    rows = [list(map(float, line.split(","))) for line in capsys.readouterr().out.strip().splitlines()]
    assert rows[0] == [2.0, 1.0]
    np.testing.assert_allclose(np.abs(rows[1:]), np.eye(2))


def test_solve_pencil_not_pd_exit_2(tmp_path, capsys):
    write_matrix_csv(tmp_path / "n.csv", np.eye(2))
    write_matrix_csv(tmp_path / "d.csv", np.diag([1.0, -1.0]))
    code = main(["solve-pencil", "--numerator", str(tmp_path / "n.csv"), "--denominator", str(tmp_path / "d.csv")])
    assert code == 2
    assert "positive definite" in capsys.readouterr().err


def test_extract_batch(workdir, capsys):
    out = workdir / "y.csv"
    code = main(["extract-batch", "--mixtures", str(workdir / "x.csv"), "--n-sources", "3", "--mixing",
                 str(workdir / "A.csv"), "--weights-out", str(workdir / "W.csv"), "--out", str(out)])
    assert code == 0
    assert SignalMatrix.from_csv(out).channel_count == 3
    assert capsys.readouterr().out.count("PI =") == 3
    assert main(["evaluate", "--mixing", str(workdir / "A.csv"), "--weights", str(workdir / "W.csv"),
                 "--extracted", str(out), "--sources", str(workdir / "s.csv")]) == 0
    assert "best match source" in capsys.readouterr().out


@pytest.mark.parametrize("method,cols", [
    ("direct", "n,y,sigma_y,PI"),
    ("dual-lp", "n,y,e,f,sigma_e,sigma_y,sigma_f,PI"),
])
def test_extract_adaptive(workdir, method, cols):
    tel = workdir / f"{method}.csv"
    code = main(["extract-adaptive", "--method", method, "--mixtures", str(workdir / "x.csv"), "--mixing",
                 str(workdir / "A.csv"), "--telemetry", str(tel), "--out", str(workdir / "y.csv")])
    assert code == 0
    lines = tel.read_text().splitlines()
    assert lines[0] == cols
    assert len(lines) == 6001


def test_run_experiment_config(tmp_path, capsys):
    cfg = resources.files("gccabss").joinpath("presets/paper_iv.json")
    code = main(["run-experiment", "--config", str(cfg), "--runs", "2", "--out-dir", str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "curve.csv").exists()
    assert "2/2 runs ok" in capsys.readouterr().out


def test_run_experiment_preset(tmp_path):
    assert main(["run-experiment", "--preset", "gcca_batch", "--runs", "2", "--out-dir", str(tmp_path)]) == 0


def test_missing_config_exit_1(tmp_path, capsys):
    assert main(["run-experiment", "--config", str(tmp_path / "missing.json")]) == 1
    assert "not found" in capsys.readouterr().err


def test_invalid_config_exit_1(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"schema_version": 1}))
    assert main(["run-experiment", "--config", str(p)]) == 1


def test_unknown_flag_exit_1(capsys):
    assert main(["generate", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_no_command_exit_1():
    assert main([]) == 1


def test_missing_input_file_exit_1(tmp_path):
    assert main(["extract-batch", "--mixtures", str(tmp_path / "no.csv"), "--out", str(tmp_path / "y.csv")]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gccabss.cli", "solve-pencil", "--numerator", "x", "--denominator", "y"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
