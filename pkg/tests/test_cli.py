import csv
import json
import math

import pytest

from plasma_peaks.cli import RunConfig, _clean, parse_domain, run_command, to_json
from plasma_peaks.errors import ParameterError


def _run(capsys, *argv):
    status = run_command(list(argv))
    out = capsys.readouterr()
    return status, out.out, out.err


def test_harmonic_center(capsys):
    status, out, _ = _run(capsys, "harmonic-center", "--grid-n", "129")
    assert status == 0
    res = json.loads(out)["result"]
    assert math.hypot(*res["center"]) <= 1e-6
    assert res["h_value"] == pytest.approx(math.log(2.2), abs=1e-10)


def test_greens(capsys):
    status, out, _ = _run(capsys, "greens", "--grid-n", "129", "--z", "0.5,0", "--x", "-0.5,0")
    assert status == 0
    res = json.loads(out)["result"]
    assert res["g"] == pytest.approx(math.log(2.2 / 1.25), rel=1e-10)
    assert res["extremizers"]["max_abs"]["value"] == pytest.approx(-3.0, abs=1e-9)


def test_minimize(capsys):
    status, out, _ = _run(capsys, "minimize", "--gamma", "0.5")
    res = json.loads(out)["result"]
    assert status == 0
    assert res["value"] == pytest.approx(1.42395, abs=1e-5)
    assert set(res) == {"z1", "z2", "value", "gradient_norm"}


def test_resolution_guard_exit_code(capsys):
    status, _, err = _run(capsys, "solve", "--gamma", "0.5", "--epsilon", "0.002",
                          "--grid-n", "129")
    assert status == 2
    assert "s*eps/h" in err


@pytest.mark.parametrize("argv", [["solve", "--bogus"], ["nope"],
                                  ["harmonic-center", "--grid-n", "33"],
                                  ["minimize", "--gamma", "-1"],
                                  ["minimize", "--gamma", "0"],
                                  ["solve", "--gamma", "0.5", "--epsilon", "0.04", "--z1", "0,0"]])
def test_usage_errors(capsys, argv):
    assert run_command(argv) == 2


def test_ansatz_with_csv(capsys, tmp_path):
    status, out, _ = _run(capsys, "ansatz", "--gamma", "0.5", "--epsilon", "0.08",
                          "--z1", "-0.2,0", "--z2", "0.7,0", "--csv-dir", str(tmp_path))
    assert status == 0
    res = json.loads(out)["result"]
    assert res["W_stats"]["closed_form_discrepancy"] <= 1e-10
    assert res["levelset_report"]["passed"]
    with open(tmp_path / "W.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "W"]
    assert len(rows) - 1 == 51429


def test_solve_writes_contours(capsys, tmp_path):
    status, out, _ = _run(capsys, "solve", "--gamma", "0.5", "--epsilon", "0.04",
                          "--csv-dir", str(tmp_path))
    assert status == 0
    res = json.loads(out)["result"]
    assert res["residual_norm"] <= 1e-10
    assert res["components_pos"] == res["components_neg"] == 1
    assert res["eps2_lambda1_pos"] == pytest.approx(1.0, abs=0.05)
    with open(tmp_path / "contours.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["level"] for r in rows} == {"1", "-0.5"}
    assert all(r["closed"] == "1" for r in rows)


def test_sweep_csv(capsys):
    status, out, _ = _run(capsys, "sweep-gamma", "--gammas", "0.5,0.2")
    assert status == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["gamma"] for r in rows] == ["0.5", "0.2"]
    assert all(r["error"] == "" for r in rows)


def test_out_file_and_determinism(capsys, tmp_path):
    path = tmp_path / "report.json"
    runs = []
    for _ in range(2):
        assert run_command(["verify", "--suite", "disk-oracle", "--out", str(path)]) == 0
        runs.append(path.read_bytes())
    assert runs[0] == runs[1]
    report = json.loads(runs[0])
    assert report["result"]["passed"]


def test_config_round_trip(capsys):
    _, out, _ = _run(capsys, "ansatz", "--gamma", "0.5", "--epsilon", "0.08", "--grid-n", "129",
                     "--z1", "-0.2,0", "--z2", "0.7,0")
    d = json.loads(out)["config"]
    cfg = RunConfig.from_dict(d)
    assert cfg.z1 == (-0.2, 0.0)
    assert json.loads(to_json(cfg.to_dict())) == d


def test_validate():
    with pytest.raises(ParameterError):
        RunConfig("solve", grid_n=33).validate()
    with pytest.raises(ParameterError):
        RunConfig("solve", r_factor=1.0).validate()
    RunConfig("solve", gamma=0.5, epsilon=0.04).validate()


def test_parse_domain(tmp_path):
    assert parse_domain("disk") == {"type": "disk", "radius": 1.0}
    assert parse_domain("disk:2")["radius"] == 2.0
    assert parse_domain("ellipse:2,1") == {"type": "ellipse", "semi_x": 2.0, "semi_y": 1.0}
    p = tmp_path / "d.json"
    p.write_text('{"type": "disk", "radius": 0.5}')
    assert parse_domain(str(p))["radius"] == 0.5


def test_clean_rounds_to_twelve_digits():
    assert _clean(1 / 3) == 0.333333333333
    assert _clean(float("nan")) is None
    assert _clean({"a": (1, 2.0)}) == {"a": [1, 2.0]}
