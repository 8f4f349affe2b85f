import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from pdlanding.cli import COSTATE_COLUMNS, CSV_COLUMNS, main

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def edited(tmp_path, name, change):
    doc = json.loads((SCENARIOS / name).read_text())
    change(doc)
    path = tmp_path / "edited.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", str(SCENARIOS / "mars_q0_free.json"), "--out-dir", str(out)])
    return code, out


def test_solve_writes_outputs(solved, capsys):
    code, out = solved
    assert code == 0
    header = read_rows(out / "trajectory.csv")[0]
    assert tuple(header[:16]) == CSV_COLUMNS
    report = json.loads((out / "structure_report.json").read_text())
    assert report["structure"] == "Max-Min-Max"
    assert report["method"] == "indirect" and report["converged"] and report["passed"]


def test_summary_line(tmp_path, capsys):
    main(["solve", str(SCENARIOS / "vertical_q0.json"), "--out-dir", str(tmp_path)])
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("cost=")
    assert "t_f=31.1796" in line and "structure=Min(0.00-6.05) Max(6.05-31.18)" in line


def test_verify_round_trip(solved, capsys):
    _, out = solved
    capsys.readouterr()
    assert main(["verify", str(out / "trajectory.csv"), str(SCENARIOS / "mars_q0_free.json")]) == 0
    table = capsys.readouterr().out
    saved = json.loads((out / "structure_report.json").read_text())["verdicts"]
    for name, v in saved.items():
        row = next(line for line in table.splitlines() if line.startswith(name + " "))
        assert row.split()[1] == v["status"], name


def test_verify_without_costates_skips_pmp_checks(solved, tmp_path, capsys):
    _, out = solved
    rows = read_rows(out / "trajectory.csv")
    keep = len(rows[0]) - len(COSTATE_COLUMNS)
    write_rows(tmp_path / "t.csv", [r[:keep] for r in rows])
    capsys.readouterr()
    assert main(["verify", str(tmp_path / "t.csv"), str(SCENARIOS / "mars_q0_free.json")]) == 0
    table = capsys.readouterr().out
    for name in ("psi_sign", "qr_monotone", "psi_rate", "transversality"):
        assert next(l for l in table.splitlines() if l.startswith(name + " ")).split()[1] == "skipped"


def test_verify_reports_cone_violation(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", str(SCENARIOS / "mars_q0_p45.json"), "--out-dir", str(out)]) == 0
    rows = read_rows(out / "trajectory.csv")
    col = {name: j for j, name in enumerate(rows[0])}
    r = rows[40]
    a = float(r[col["throttle"]])
    r[col["ux"]], r[col["uy"]], r[col["uz"]] = repr(a), "0.0", "0.0"
    write_rows(tmp_path / "bad.csv", rows)
    capsys.readouterr()
    assert main(["verify", str(tmp_path / "bad.csv"), str(SCENARIOS / "mars_q0_p45.json")]) == 2
    assert "pointing violation at t=" in capsys.readouterr().out


def test_verify_rejects_wrong_columns(solved, tmp_path):
    _, out = solved
    rows = read_rows(out / "trajectory.csv")
    rows[0][3] = "altitude"
    write_rows(tmp_path / "t.csv", rows)
    assert main(["verify", str(tmp_path / "t.csv"), str(SCENARIOS / "mars_q0_free.json")]) == 65


def test_verify_rejects_non_numeric_values(solved, tmp_path):
    _, out = solved
    rows = read_rows(out / "trajectory.csv")
    rows[5][1] = "abc"
    write_rows(tmp_path / "t.csv", rows)
    assert main(["verify", str(tmp_path / "t.csv"), str(SCENARIOS / "mars_q0_free.json")]) == 65


@pytest.mark.parametrize("change, key", [
    (lambda d: d["constraints"].update(pointing_deg=95), "constraints.pointing_deg"),
    (lambda d: d["vehicle"].update(pressure_term=6000.0), "vehicle.pressure_term"),
    (lambda d: d["vehicle"].update(colour="red"), "vehicle.colour"),
    (lambda d: d.update(extra=1), "scenario.extra"),
    (lambda d: d["initial"].pop("mass"), "initial.mass"),
    (lambda d: d["solver"]["options"].update(n_nodes=1.5), "solver.options.n_nodes"),
    (lambda d: d.update(cost="min_everything"), "cost"),
])
def test_malformed_scenario_names_the_key(tmp_path, capsys, change, key):
    path = edited(tmp_path, "mars_q0_free.json", change)
    assert main(["solve", path, "--out-dir", str(tmp_path)]) == 64
    assert key in capsys.readouterr().err


def test_net_thrust_message(tmp_path, capsys):
    path = edited(tmp_path, "mars_q0_free.json", lambda d: d["vehicle"].update(pressure_term=6000.0))
    main(["solve", path])
    assert "net thrust must stay positive" in capsys.readouterr().err


def test_usage_errors_exit_64(tmp_path):
    assert main(["sweep", str(SCENARIOS / "mars_q0_free.json"), "--param", "gamma", "--values", ""]) == 64
    with pytest.raises(SystemExit) as exc:
        main(["sweep", str(SCENARIOS / "mars_q0_free.json"), "--param", "mass", "--values", "1"])
    assert exc.value.code == 64
    (tmp_path / "broken.json").write_text("{")
    assert main(["solve", str(tmp_path / "broken.json")]) == 64


def test_solver_failure_exit_code(tmp_path):
    # an unreachable target with one Newton step cannot converge
    path = edited(tmp_path, "mars_q0_free.json",
                  lambda d: d["solver"]["options"].update(max_iter=1))
    assert main(["solve", path, "--method", "indirect", "--out-dir", str(tmp_path)]) == 1


def test_direct_solve_is_deterministic(tmp_path):
    for run in ("a", "b"):
        assert main(["solve", str(SCENARIOS / "mars_q0_free.json"), "--method", "direct",
                     "--nodes", "30", "--out-dir", str(tmp_path / run)]) in (0, 2)
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_auto_falls_back_to_transcription(tmp_path, capsys):
    code = main(["solve", str(SCENARIOS / "mars_q0_gs0_p45.json"), "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "note: indirect solution violates the glide slope; using direct" in out
    report = json.loads((tmp_path / "structure_report.json").read_text())
    assert report["structure"] == "Max-Min-Max" and report["method"] == "direct"


def test_sweep_pointing_angle(tmp_path):
    assert main(["sweep", str(SCENARIOS / "mars_q0_free.json"), "--param", "theta",
                 "--values", "45,90,off", "--jobs", "2", "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert [r["value"] for r in rows] == ["45", "90", "off"]
    assert all(r["status"] == "ok" and r["structure"] == "Max-Min-Max" for r in rows)
    assert float(rows[0]["pointing_active_s"]) > float(rows[1]["pointing_active_s"]) == 0.0
    assert rows[1]["cost"] == rows[2]["cost"]


def test_sweep_glide_slope(tmp_path):
    assert main(["sweep", str(SCENARIOS / "mars_q0_gs0_p45.json"), "--param", "gamma",
                 "--values", "off,0,5", "--jobs", "3", "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert [r["structure"] for r in rows] == ["Max-Min-Max"] * 3
    counts = [int(r["contacts"]) for r in rows]
    assert counts[0] == 0 and counts[1] == 2 and counts[2] >= 1


def test_sweep_records_failures_in_rows(tmp_path):
    assert main(["sweep", str(SCENARIOS / "mars_q0_free.json"), "--param", "u_min",
                 "--values", "0.9,0.3", "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert rows[0]["status"] == "invalid" and "throttle" in rows[0]["message"]
    assert rows[1]["status"] == "ok"


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "pdlanding.cli", "solve",
                          str(SCENARIOS / "vertical_q0.json"), "--out-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "method=indirect" in res.stdout
