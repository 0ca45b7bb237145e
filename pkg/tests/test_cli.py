import csv
import json
import subprocess
import sys

import pytest

from iqaebias.cli import COND_COLUMNS, PROFILE_COLUMNS, SCATTER_COLUMNS, SWEEP_COLUMNS, main
from iqaebias.estimation import f_fin


def run_cli(*argv):
    return main([str(x) for x in argv])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def header(path):
    with open(path) as fh:
        return fh.readline().rstrip("\n")


def test_run_a0(tmp_path):
    out = tmp_path / "run.json"
    assert run_cli("run", "--a", 0, "--epsilon", 1e-3, "--alpha", 0.05, "--seed", 1, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["a_hat"] == 0
    assert doc["config"]["epsilon"] == 1e-3
    assert doc["seed_plan"]["master_seed"] == 1
    assert "software" in doc and doc["query_ledger"]["grover_calls"] >= 0
    assert doc["result"]["rounds"][-1]["exit"] == "terminated"


def test_run_mitigated_reports_extra_round(tmp_path):
    plain, mit = tmp_path / "p.json", tmp_path / "m.json"
    run_cli("run", "--a", 0.2505, "--seed", 7, "--out", plain)
    run_cli("run", "--a", 0.2505, "--seed", 7, "--mitigate", "--out", mit)
    p = json.loads(plain.read_text())["result"]
    m = json.loads(mit.read_text())["result"]
    assert m["plain_a_hat"] == p["a_hat"]
    assert m["total_grover_calls"] == p["total_grover_calls"] + m["k_fin"] * m["N_fin"]


def test_run_round_limit_exit_code(tmp_path, capsys):
    code = run_cli("run", "--a", 0.5, "--r-min", 1000, "--max-rounds", 2, "--out", tmp_path / "x")
    assert code == 3
    assert "rounds" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["run", "--a", "2"],
    ["run", "--a", "0.5", "--epsilon", "0"],
    ["run", "--a", "0.5", "--alpha", "1.5"],
    ["sweep", "--points", "0"],
    ["sweep", "--seed", "-1"],
    ["resonance", "--a", "0"],
    ["cond-bias", "--k", "x"],
])
def test_bad_flags_exit_2(argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_resonance_json(capsys):
    assert run_cli("resonance", "--a", 0.2505) == 0
    doc = json.loads(capsys.readouterr().out)
    assert (doc["l"], doc["m"]) == (1, 3)
    assert doc["delta"] == pytest.approx(0.000577, abs=5e-7)
    run_cli("resonance", "--a", 0.5)
    doc = json.loads(capsys.readouterr().out)
    assert (doc["l"], doc["m"]) == (1, 2) and abs(doc["delta"]) < 1e-15


def test_sweep_single_point(tmp_path):
    out = tmp_path / "s.csv"
    assert run_cli("sweep", "--a-min", 0.3, "--a-max", 0.3, "--points", 1, "--runs", 1,
                   "--seed", 3, "--out", out) == 0
    assert header(out) == ",".join(SWEEP_COLUMNS)
    assert header(out) == ("a,n_run,mean_error,stderr,biased_flag,success_rate,mean_queries,"
                           "mean_final_round_queries,mitigated")
    (row,) = read_rows(out)
    assert float(row["a"]) == 0.3 and int(row["n_run"]) == 1
    assert float(row["stderr"]) == abs(float(row["mean_error"]))
    assert row["biased_flag"] == "0" and row["mitigated"] == "0"
    meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
    assert meta["seed_plan"]["master_seed"] == 3


def test_sweep_byte_identical(tmp_path):
    args = ["sweep", "--a-min", 0.1, "--a-max", 0.9, "--points", 3, "--runs", 40, "--seed", 11]
    paths = [tmp_path / f"{i}.csv" for i in range(3)]
    run_cli(*args, "--threads", 1, "--out", paths[0])
    run_cli(*args, "--threads", 1, "--out", paths[1])
    run_cli(*args, "--threads", 4, "--out", paths[2])
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()


def test_cond_bias_fixed_point_and_header(tmp_path):
    out = tmp_path / "c.csv"
    assert run_cli("cond-bias", "--a", 0.2505, "--k", "1,200", "--f-points", 3, "--runs", 30,
                   "--out", out) == 0
    assert header(out) == ",".join(COND_COLUMNS)
    assert COND_COLUMNS[:5] == ["k_fin", "f_fin", "a_tilde", "n_end", "b_tilde"]
    rows = read_rows(out)
    assert len(rows) == 6
    # k=1 cannot terminate at epsilon=1e-3, so those cells are NaN
    for r in rows:
        if r["k_fin"] == "1":
            assert r["b_tilde"] == "NaN" and r["nan_reason"]


def test_cond_bias_cell_at_fixed_point(tmp_path):
    # a one-point grid sits at f = 0.5; choose a with f_fin(a, 1) = 0.5
    out = tmp_path / "c.csv"
    assert f_fin(0.25, 1) == pytest.approx(0.5)
    run_cli("cond-bias", "--a", 0.25, "--k", 1, "--f-points", 1, "--runs", 5, "--out", out)
    (row,) = read_rows(out)
    assert float(row["a_tilde"]) == pytest.approx(0.25, abs=1e-12)


def test_scatter_and_render(tmp_path):
    cond, scat, svg = tmp_path / "c.csv", tmp_path / "s.csv", tmp_path / "h.svg"
    run_cli("cond-bias", "--k", "200,400", "--f-points", 5, "--runs", 100, "--out", cond)
    assert run_cli("scatter", "--runs", 50, "--out", scat) == 0
    assert header(scat) == ",".join(SCATTER_COLUMNS)
    assert len(read_rows(scat)) == 50
    assert run_cli("render", "--cond", cond, "--scatter", scat, "--out", svg) == 0
    text = svg.read_text()
    assert text.startswith("<svg") and text.count("<circle") >= 1


def test_render_all_nan_is_white(tmp_path):
    cond, svg = tmp_path / "c.csv", tmp_path / "h.svg"
    lines = [",".join(COND_COLUMNS)]
    for k in (200, 300):
        for f in (0.0, 0.5, 1.0):
            lines.append(f"{k},{f},0.25,0,NaN,insufficient_terminations")
    cond.write_text("\n".join(lines) + "\n")
    assert run_cli("render", "--cond", cond, "--out", svg) == 0
    text = svg.read_text()
    cells = text.split('<g class="cells"')[1].split("</g>")[0]
    fills = [part.split('"')[0] for part in cells.split('fill="')[1:]]
    assert len(fills) == 6 and set(fills) == {"#ffffff"}


def test_render_malformed_csv_reports_line(tmp_path, capsys):
    cond = tmp_path / "bad.csv"
    cond.write_text("k_fin,f_fin,b_tilde\n200,0.1,1e-5\n200,zero,1e-5\n")
    assert run_cli("render", "--cond", cond, "--out", tmp_path / "h.svg") == 4
    assert f"{cond}:3" in capsys.readouterr().err
    cond.write_text("k_fin,f_fin,b_tilde\n200,0.1\n")
    assert run_cli("render", "--cond", cond, "--out", tmp_path / "h.svg") == 4
    assert run_cli("render", "--cond", tmp_path / "missing.csv") == 4


def test_ci_profile(tmp_path):
    out = tmp_path / "p.csv"
    assert run_cli("ci-profile", "--k", 0, "--n", 100, "--a", 0.25, "--out", out) == 0
    assert header(out) == ",".join(PROFILE_COLUMNS)
    rows = read_rows(out)
    assert len(rows) == 101
    first = rows[0]
    assert float(first["a_hat"]) == 0.0 and float(first["a_lo"]) == 0.0
    assert float(first["delta_a"]) == float(first["a_hi"])
    for r in rows:
        assert float(r["a_lo"]) <= float(r["a_hat"]) <= float(r["a_hi"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "iqaebias", "resonance", "--a", "0.25"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["m"] == 3
