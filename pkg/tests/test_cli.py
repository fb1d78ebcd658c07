import csv
import json
import math
import os
import subprocess
import sys

import pytest

from isotrace import cli
from isotrace.errors import ConfigError


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_spectrum_example(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["spectrum", "--out", str(out)]) == 0
    rows = read_csv(out / "spectrum.csv")
    assert rows[0] == cli.SPECTRUM_HEADER
    assert [float(r[3]) for r in rows[1:]] == [1, 2, 2, 3, 3, 3]
    raw = (out / "spectrum.csv").read_bytes()
    assert b"\r" not in raw
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["outputs"]) == {"spectrum.csv", "report.json", "timings.json"}
    assert "stages_seconds" in json.loads((out / "timings.json").read_text())


def test_predict_height(tmp_path):
    cfg = write(tmp_path, "c.json", {"symbol": "height", "d": 2, "k": 1})
    assert cli.main(["predict", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    res = json.loads((tmp_path / "o" / "predict.json").read_text())
    assert len(res["critical_points"]) == 2
    for t, c in zip(res["prediction"]["terms"], res["critical_points"]):
        assert t["gamma_abs"] == pytest.approx(c["hess_det"] ** -0.5 / math.pi, rel=1e-12)
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["calibration"]["phase"]["phase_flag"] == "statement"


def test_trace_bit_identical_and_round_trip(tmp_path):
    cfg = {"perturbation": "beat", "N_max": 1200, "lambda_grid": {"start": 900, "stop": 1000, "num": 16}}
    path = write(tmp_path, "c.json", cfg)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["trace", "--config", path, "--out", str(a), "--seed", "4", "--threads", "2"]) == 0
    assert cli.main(["trace", "--config", path, "--out", str(b), "--seed", "4", "--threads", "2"]) == 0
    for name in ("trace.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rep = json.loads((a / "report.json").read_text())
    assert rep["config"]["seed"] == 4 and rep["config"]["threads"] == 2
    # rerun from the embedded config
    c = tmp_path / "c"
    emb = write(tmp_path, "emb.json", rep["config"])
    assert cli.main(["trace", "--config", emb, "--out", str(c)]) == 0
    assert (c / "report.json").read_bytes() == (a / "report.json").read_bytes()
    assert (c / "trace.csv").read_bytes() == (a / "trace.csv").read_bytes()
    rows = read_csv(a / "trace.csv")
    assert rows[0] == cli.TRACE_HEADER and len(rows) == 17


def test_rerun_overwrites(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / "spectrum.csv").write_text("stale\n")
    assert cli.main(["spectrum", "--out", str(out)]) == 0
    assert not (out / "spectrum.csv").read_text().startswith("stale")
    assert not [f for f in os.listdir(out) if f.startswith(".tmp-")]


def test_invalid_config_single_error(tmp_path, capsys):
    bad = {"d": 9, "window_width": 0.6, "lambda_grid": {"spacing": "cubic"}, "bogus": 1}
    out = tmp_path / "o"
    assert cli.main(["trace", "--config", write(tmp_path, "c.json", bad), "--out", str(out)]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config"
    for frag in ("d must", "window_width", "spacing", "unknown keys"):
        assert frag in err["message"]
    assert not out.exists()


def test_validate_config_errors():
    with pytest.raises(ConfigError):
        cli.validate_config({"perturbation": "nope"}, "trace")
    with pytest.raises(ConfigError):
        cli.validate_config({}, "crossmodel")
    with pytest.raises(ConfigError):
        cli.validate_config({"k": 0}, "trace")
    with pytest.raises(ConfigError):
        cli.validate_config({"perturbation": {"terms": [{"alpha": [3, 0], "beta": [0, 0], "re": 1}]}}, "trace")
    cfg = cli.validate_config({"perturbation": {"terms": [{"alpha": [1, 0], "beta": [0, 1], "re": 0.2}]}}, "trace")
    assert cli.perturbation_of(cfg).degree() == 2


def test_not_morse_is_computation_error(tmp_path, capsys):
    sym = {"k": 1, "terms": [{"alpha": [1, 0], "beta": [1, 0], "re": 1}, {"alpha": [0, 1], "beta": [0, 1], "re": 1}]}
    out = tmp_path / "o"
    assert cli.main(["predict", "--config", write(tmp_path, "c.json", {"symbol": sym}), "--out", str(out)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "NotMorseError"
    assert not out.exists()


def test_failed_criterion_exit_code(tmp_path):
    cfg = {"symbol": "height_quadratic", "N_list": [4, 6, 8, 10], "fs_calibration": 0.5}
    out = tmp_path / "o"
    assert cli.main(["compare", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)]) == 3
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] is False
    assert rep["calibration"]["fs"] == {"factor": 0.5, "source": "config"}


def test_crossmodel_mode(tmp_path):
    cfg = {"perturbation": "rotation", "N_list": [16, 32, 64, 128]}
    out = tmp_path / "o"
    assert cli.main(["crossmodel", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "crossmodel.csv")
    assert rows[0] == ["N", "deviation"] and len(rows) == 5


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "isotrace.cli", "spectrum", "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
