import csv
import json
import subprocess
import sys

import pytest

from rank1lab.cli import main


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def body(text):
    return list(csv.reader(line for line in text.splitlines() if not line.startswith("#")))


def test_windows(capsys):
    status, out, _ = run(capsys, "windows", "--stages", "1..6")
    assert status == 0
    rows = body(out)
    assert rows[0] == ["j", "lo", "hi"] and rows[1] == ["1", "13", "32"] and len(rows) == 7


def test_build_echoes_config(capsys):
    status, out, _ = run(capsys, "build")
    lines = out.splitlines()
    assert lines[0].startswith("# rank1lab ")
    config = json.loads(lines[1].removeprefix("# config: "))
    assert config["h1"] == 10 and config["max_stage"] == 7
    rows = body(out)
    assert rows[0] == ["j", "h_j", "r_j", "sum_spacers", "total_raw_num", "total_raw_den"]
    assert rows[1] == ["1", "10", "4", "2", "11", "1"] and len(rows) == 8


def test_env_overrides_stage_cap(capsys, monkeypatch):
    monkeypatch.setenv("RANK1LAB_MAX_STAGE", "4")
    _, out, _ = run(capsys, "build")
    assert len(body(out)) == 5


def test_correlate(capsys):
    status, out, _ = run(capsys, "correlate", "--a", "full@1", "--b", "full@1", "--n", "1")
    data = json.loads(out)
    assert status == 0
    assert data["record"]["raw"] == [21, 2] and data["record"]["unresolved"] == [0, 1]
    assert data["config"]["normalize_stage"] == 8


def test_unresolved_exit_code(capsys):
    status, out, err = run(capsys, "correlate", "--a", "full@2", "--b", "full@2", "--n", "4000")
    assert status == 3 and out == ""
    assert json.loads(err)["error"] == "unresolvable_at_cap"
    status, out, _ = run(capsys, "correlate", "--a", "full@2", "--b", "full@2", "--n", "4000", "--allow-unresolved")
    assert status == 0 and json.loads(out)["record"]["unresolved"] != [0, 1]


@pytest.mark.parametrize(
    "argv",
    [
        ["correlate", "--a", "half@2", "--b", "full@2", "--n", "1"],
        ["correlate", "--a", "full@2", "--b", "full@2"],
        ["build", "--config", "/nonexistent/spec.json"],
        ["windows", "--stages", "1-3"],
        ["fit", "--n-from-cascade", "J=3,m=2,k=10000"],
    ],
)
def test_config_errors(capsys, argv):
    status, _, err = run(capsys, *argv)
    assert status == 2
    assert "error" in json.loads(err)


def test_bad_config_contents(capsys, tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"kind": "double_staircase", "h1": 10, "cutting": {"rule": "constant", "value": 3}}))
    status, _, err = run(capsys, "build", "--config", str(path))
    assert status == 2 and json.loads(err)["error"] == "invalid_parameters"


def test_scan_keeps_input_order(capsys):
    argv = ["scan", "--a", "runs@2:[0-20]", "--b", "runs@2:[10-45]", "--n-list", "500,3,77,3,4000"]
    _, serial, _ = run(capsys, *argv)
    _, threaded, _ = run(capsys, *argv, "--threads", "3")
    assert serial == threaded
    rows = body(serial)
    assert [r[0] for r in rows[1:]] == ["500", "3", "77", "3", "4000"]
    assert rows[2] == rows[4]


def test_scan_window_sweep(capsys, tmp_path):
    out = tmp_path / "scan.csv"
    status, _, _ = run(capsys, "scan", "--a", "full@1", "--b", "base@1", "--window-stage", "2", "--step", "10", "--out", str(out))
    assert status == 0
    rows = body(out.read_text())
    assert rows[1][0] == "96" and len(rows) == 1 + len(range(96, 186, 10))


def test_fit_cascade(capsys):
    status, out, _ = run(capsys, "fit", "--n-from-cascade", "J=5,m=1,k=0")
    fit = json.loads(out)["fit"]
    assert status == 0 and fit["best_m"] == 1 and fit["best_k"] == 0 and fit["within_tolerance"]


def test_fit_sidon_config(capsys, tmp_path):
    path = tmp_path / "sidon.json"
    path.write_text(json.dumps({"kind": "double_sidon", "h1": 5, "cutting": {"rule": "constant", "value": 4}, "max_stage": 4}))
    status, out, _ = run(capsys, "fit", "--config", str(path), "--n", "0", "--m-max", "1", "--k-window=-1..1")
    fit = json.loads(out)["fit"]
    assert status == 0 and (fit["best_m"], fit["best_k"], fit["residual"]) == (0, 0, 0.0)


def test_decomposition_and_probe_commands(capsys):
    _, out, _ = run(capsys, "example2", "--stages", "1..4", "--k", "half")
    rows = body(out)
    assert rows[0] == ["j", "k", "D", "D1", "U", "partition_exact"]
    assert [r[5] for r in rows[1:]] == ["1"] * 4
    _, out, _ = run(capsys, "lemma2", "--stages", "2..4")
    rows = body(out)
    assert rows[1][:3] == ["2", "1", "2"]


def test_sidon_overlap(capsys):
    _, out, _ = run(capsys, "sidon-overlap", "--h", "5", "--eps", "0.2", "--m-to", "7")
    rows = body(out)
    assert rows[0] == ["m", "count"] and rows[1] == ["0", "4"] and rows[7] == ["6", "1"]


def test_outputs_are_reproducible(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        subprocess.run(
            [sys.executable, "-m", "rank1lab.cli", "lemma2", "--stages", "2..5", "--out", str(path)], check=True
        )
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_console_script_exit_code():
    proc = subprocess.run(
        [sys.executable, "-m", "rank1lab.cli", "correlate", "--a", "full@2", "--b", "full@2", "--n", "4000"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 3
    assert json.loads(proc.stderr)["error"] == "unresolvable_at_cap"
