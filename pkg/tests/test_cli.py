import csv
import io
import json
import subprocess
import sys
from fractions import Fraction
from importlib import resources

import jsonschema
import pytest

from bellopt import cli
from bellopt import inequalities as ineqs

SCHEMA = json.loads(resources.files("bellopt").joinpath("schemas/run_report.schema.json").read_text())


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    return code, report


def test_evaluate_w1(capsys):
    code, rep = run_json(capsys, "evaluate", "--inequality", "w1", "--p", "1", "--settings", "0,0", "0,0", "0,0")
    assert code == 0
    assert rep["outputs"]["value"] == 1.5
    assert rep["outputs"]["excess"] == 0.5
    assert rep["outputs"]["distance_upper"] == 0.5
    assert rep["inputs"]["defaults"] == {"seed": 42, "starts": 64, "radius": 3.0, "truncation": 32}


def test_evaluate_ch(capsys):
    code, rep = run_json(capsys, "evaluate", "--inequality", "ch", "--p", "0", "--settings", *["0,0"] * 4)
    assert code == 0
    assert rep["outputs"]["value"] == -0.5
    assert rep["outputs"]["excess"] == -0.5
    assert rep["outputs"]["distance_lower"] == -0.5


def test_evaluate_negative_components(capsys):
    code, rep = run_json(capsys, "evaluate", "--inequality", "ch", "--p", "1", "--settings", "-1,0", "-.5,-2", "1e-1,0", "-3")
    assert code == 0
    assert rep["inputs"]["settings"] == [[-1.0, 0.0], [-0.5, -2.0], [0.1, 0.0], [-3.0, 0.0]]


def test_evaluate_bad_p(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["evaluate", "--inequality", "w1", "--p", "2"])
    assert exc.value.code == 2
    assert "--p" in capsys.readouterr().err


def test_evaluate_settings_count(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["evaluate", "--inequality", "w1", "--p", "0.5", "--settings", "0,0"])
    assert exc.value.code == 2
    assert "--settings" in capsys.readouterr().err


def test_evaluate_domain_error(capsys):
    code, _, err = run(capsys, "evaluate", "--inequality", "w1", "--p", "0.5", "--settings", "nan,0", "0,0", "0,0")
    assert code == 1
    assert "finite" in err


def test_evaluate_csv(capsys):
    code, out, _ = run(capsys, "evaluate", "--inequality", "w1", "--p", "1", "--settings", "0", "0", "0", "--format", "csv")
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows["key"] == "value"
    assert float(rows["outputs.value"]) == 1.5
    assert rows["inputs.defaults.truncation"] == "32"


def _sweep_rows(out):
    reader = csv.DictReader(io.StringIO(out))
    return reader.fieldnames, list(reader)


def test_sweep_w1(capsys):
    code, out, _ = run(capsys, "sweep", "--inequality", "w1", "--grid", "0:1:0.1", "--seed", "42")
    header, rows = _sweep_rows(out)
    assert code == 0
    assert header == ["p", "value", "excess", "violated", "s0_re", "s0_im", "s1_re", "s1_im", "s2_re", "s2_im"]
    assert len(rows) == 11
    for row in rows:
        assert row["violated"] == ("1" if float(row["p"]) >= 0.4 else "0")
        assert (float(row["excess"]) > 0) == (row["violated"] == "1")


def test_sweep_j3_flips(capsys):
    code, out, _ = run(capsys, "sweep", "--inequality", "j3", "--grid", "0.3:0.4:0.05")
    _, rows = _sweep_rows(out)
    assert [r["p"] for r in rows] == ["0.3", "0.35", "0.4"]
    assert rows[0]["violated"] == "0" and rows[-1]["violated"] == "1"


@pytest.mark.parametrize("grid", ["1:0:0.1", "0:1:0", "0:1.5:0.1", "0:1", "a:b:c"])
def test_sweep_bad_grid(grid, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--inequality", "ch", "--grid", grid])
    assert exc.value.code == 2


def test_parse_grid_endpoints():
    assert cli.parse_grid("0:1:0.1")[-1] == 1.0
    assert len(cli.parse_grid("0:1:0.1")) == 11
    assert cli.parse_grid("0.3:0.3:0.1") == [0.3]
    assert cli.parse_grid("0:0.3:0.1") == [0.0, 0.1, 0.2, 0.3]


def test_sweep_json_and_byte_identical(capsys, tmp_path):
    args = ["sweep", "--inequality", "j2", "--grid", "0.2:0.5:0.1", "--format", "json"]
    code, rep = run_json(capsys, *args)
    assert code == 0 and len(rep["outputs"]["rows"]) == 4
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    assert cli.main(args + ["--output", str(first)]) == 0
    assert cli.main(args + ["--output", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.read_text()) == rep


def test_threshold_w1(capsys):
    code, rep = run_json(capsys, "threshold", "--inequality", "w1")
    out = rep["outputs"]
    assert code == 0 and out["status"] == "found"
    assert out["p_star"] == pytest.approx(1 / 3, abs=1e-3)
    lo, hi = out["bracket"]
    assert lo <= out["p_star"] <= hi
    assert len(out["evidence"]["settings"]) == 3
    assert rep["seed"] == 42


def test_threshold_no_violation_is_an_answer(capsys, monkeypatch):
    dark = ineqs.BellInequality("w1", [1, 0, 0], [[0] * 3] * 3, None, 1)
    monkeypatch.setattr(cli.ineqs, "get", lambda name: dark)
    code, rep = run_json(capsys, "threshold", "--inequality", "w1", "--starts", "2")
    assert code == 0
    assert rep["outputs"]["status"] == "no violation"
    assert rep["outputs"]["p_star"] is None


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("BELLOPT_SEED", "7")
    _, rep = run_json(capsys, "verify-lhv", "--inequality", "w1")
    assert rep["seed"] == 7
    _, rep = run_json(capsys, "verify-lhv", "--inequality", "w1", "--seed", "9")
    assert rep["seed"] == 9


def test_verify_all(capsys):
    code, rep = run_json(capsys, "verify-lhv", "--all")
    assert code == 0
    results = rep["outputs"]["results"]
    assert [r["name"] for r in results] == list(ineqs.BUILTIN_NAMES)
    assert all(r["holds"] and r["tight"] for r in results)


def test_verify_w1(capsys):
    code, rep = run_json(capsys, "verify-lhv", "--inequality", "w1")
    assert code == 0
    assert [1, 1, 0] in rep["outputs"]["results"][0]["attaining"]["upper"]


def test_verify_unknown(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify-lhv", "--inequality", "nosuch"])
    assert exc.value.code == 2


def test_verify_failure_exit_code(capsys, monkeypatch):
    bad = ineqs.wigner_w1().with_bounds(upper=Fraction(1, 2))
    monkeypatch.setattr(cli.ineqs, "get", lambda name: bad)
    code, rep = run_json(capsys, "verify-lhv", "--inequality", "w1")
    assert code == 1
    assert rep["outputs"]["results"][0]["violated_at"] == [1, 1, 0]


def test_oracle_pair(capsys):
    code, rep = run_json(capsys, "oracle-check", "--p", "1", "--pair", "1,0", "-1,0")
    check = rep["outputs"]["checks"][0]
    assert code == 0
    assert check["joint"] == pytest.approx(0.2706706, abs=1e-7)
    assert abs(check["joint"] - check["joint_oracle"]) <= 1e-9
    assert rep["outputs"]["max_joint_discrepancy"] <= 1e-9


def test_oracle_random_small(capsys):
    code, rep = run_json(capsys, "oracle-check", "--random", "25", "--seed", "42")
    assert code == 0 and rep["outputs"]["count"] == 25 and rep["outputs"]["passed"]


def test_oracle_truncation_failure(capsys):
    code, _, err = run(capsys, "oracle-check", "--pair", "5,0", "0,0", "--truncation", "8")
    assert code == 2
    assert "truncation" in err


def test_oracle_tolerance_failure(capsys, monkeypatch):
    monkeypatch.setattr(cli.fock, "joint_vacuum_probability_oracle", lambda p, a, b, N: 2.0)
    code, rep = run_json(capsys, "oracle-check", "--pair", "0,0", "0,0")
    assert code == 1 and not rep["outputs"]["passed"]


def test_report_round_trip():
    rep = cli.RunReport("evaluate", {"settings": [1 - 2j, 0.1], "defaults": {"seed": 1, "starts": 1, "radius": 1.0,
                                                                             "truncation": 2}},
                        {"value": 0.1 + 0.2, "excess": -1e-300, "flag": True}, 1)
    text = rep.to_json()
    back = cli.RunReport.from_json(text)
    assert back == rep
    assert back.to_json() == text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bellopt", "verify-lhv", "--all", "--format", "csv"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "outputs.all_hold,1" in proc.stdout
