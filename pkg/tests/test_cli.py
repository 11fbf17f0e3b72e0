import csv
import io
import json

import pytest

from qpricer.cli import main
from qpricer.static_policy import profit_guarantee, revenue_guarantee


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def test_solve_vi_json_output(capsys):
    code, out = run_cli(
        ["solve", "--family", "linear", "--a", "3", "--b", "4", "--method", "vi"],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["converged"]
    assert payload["rates"][0] == pytest.approx(0.41421356, abs=1e-5)
    assert payload["metrics"]["objective"] > 0


def test_solve_direct_sojourn(capsys):
    code, out = run_cli(
        [
            "solve", "--family", "exponential", "--a", "1.0", "--b", "2.0",
            "--objective", "sojourn", "--method", "direct", "--restarts", "3",
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["metrics"]["objective"] >= 0


def test_solve_vi_rejects_sojourn(capsys):
    code = main(["solve", "--family", "linear", "--objective", "sojourn", "--method", "vi"])
    err = capsys.readouterr().err
    assert code == 2
    assert "occupancy" in err


def test_static_subcommand(capsys):
    code, out = run_cli(
        ["static", "--family", "linear", "--a", "1", "--b", "2", "--gamma-max", "16"],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["cutoff"] >= 0
    assert payload["metrics"]["objective"] >= 0


def test_guarantees_csv_grid(capsys):
    code, out = run_cli(["guarantees", "--servers", "3", "--gamma-max", "6"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["gamma"]) for r in rows] == [2, 3, 4, 5, 6]
    first = rows[0]
    assert float(first["profit"]) == pytest.approx(profit_guarantee(3), rel=1e-10)
    assert float(rows[-1]["revenue"]) == pytest.approx(revenue_guarantee(6, 3), rel=1e-10)
    assert list(rows[0].keys()) == [
        "C", "gamma", "profit", "revenue", "cost", "sojourn_revenue", "sojourn_cost",
    ]


def test_tables_tiny_run(capsys, tmp_path):
    out_file = tmp_path / "t2.csv"
    code, _ = run_cli(
        [
            "--reps", "1", "--seed", "5", "--out", str(out_file),
            "tables", "--table", "2", "--families", "linear",
            "--servers-list", "1", "--restarts", "2",
        ],
        capsys,
    )
    assert code == 0
    rows = list(csv.DictReader(out_file.open()))
    assert len(rows) == 1
    assert rows[0]["table"] == "2"


def test_tightness_sweep_cli(capsys):
    code, out = run_cli(
        ["--format", "json", "tightness", "--kappa", "1.5", "--a-values", "10,1000"],
        capsys,
    )
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 2
    assert rows[0]["ratio"] > rows[1]["ratio"]


def test_tightness_sojourn_examples_cli(capsys):
    code, out = run_cli(
        ["--format", "json", "tightness", "--sojourn-examples"], capsys
    )
    assert code == 0
    rows = json.loads(out)
    assert {r["case"] for r in rows} == {"linear_a5000_b6000", "exponential_a0.463_b2"}


def test_simulate_static_policy(capsys):
    code, out = run_cli(
        [
            "--seed", "3", "simulate", "--family", "linear", "--a", "1", "--b", "2",
            "--rate", "1.0", "--cutoff", "0", "--events", "20000",
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    est = payload["estimates"]["expected_number"]
    assert est == pytest.approx(0.5, abs=0.05)
    assert payload["analytic"]["expected_number"] == pytest.approx(0.5)


def test_simulate_dynamic_rates(capsys):
    code, out = run_cli(
        [
            "simulate", "--family", "linear", "--a", "1", "--b", "3",
            "--rates", "2.0,1.0,0.5", "--events", "20000",
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["events_processed"] == 20000
