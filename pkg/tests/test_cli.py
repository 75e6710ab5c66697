from fractions import Fraction as F

import pytest

from oagsim import dtb, harness
from oagsim.cli import main, parse_grid


def rows(path):
    return harness.read_csv(path)[1]


def test_run_example(tmp_path):
    out = tmp_path / "r.csv"
    code = main("run --problem caching --beta 0 --tau 1 --trials 100 --seed 7 --generator cyclic k=10 rounds=20".split() + ["--out", str(out)])
    assert code == 0
    assert len(rows(out)) == 100


def test_config_errors(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    assert main(["run", "--problem", "matching", "--beta", "1.5", "--generator", "upper_triangular", "n=3", "--out", out]) == 2
    assert main(["run", "--problem", "matching", "--generator", "upper_triangular", "n=3", "--bogus", "--out", out]) == 2
    assert main(["run", "--problem", "matching", "--generator", "nope", "--out", out]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1 1\n0: 7\narrival: 0\n")
    assert main(["run", "--problem", "matching", "--instance", str(bad), "--out", out]) == 2
    assert "line 3" in capsys.readouterr().err


def test_seed_from_environment(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["run", "--problem", "mts", "--generator", "random", "n=3", "m=10", "cost_grid_q=2", "--trials", "3", "--beta", "0.5", "--tau", "0.5"]
    monkeypatch.setenv("OAG_SEED", "41")
    main(args + ["--out", str(a)])
    main(args + ["--seed", "41", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("OAG_SEED", "x")
    assert main(args + ["--out", str(a)]) == 2


def test_instance_file_run(tmp_path):
    inst = tmp_path / "m.txt"
    inst.write_text("2 2\n0: 0 1\n1: 0\narrival: 1 0\n")
    out = tmp_path / "r.csv"
    assert main(["run", "--problem", "matching", "--instance", str(inst), "--tau", "1", "--trials", "4", "--out", str(out)]) == 0
    assert {r["ratio"] for r in rows(out)} == {"1"}


def test_sweep_grid_and_plot(tmp_path):
    out, svg = tmp_path / "s.csv", tmp_path / "s.svg"
    code = main(
        ["sweep", "--problem", "matching", "--beta-grid", "0:1:1", "--tau-grid", "0:1:1", "--trials", "50"]
        + ["--generator", "random_perfect", "n=10", "extra_edge_prob=0.2", "--out", str(out), "--plot", str(svg)]
    )
    assert code == 0
    data = rows(out)
    assert len(data) == 4
    limit = [r for r in data if r["beta"] == "0" and r["tau"] == "1"][0]
    assert limit["bound"] == "1"
    assert svg.exists()
    replot = tmp_path / "p.svg"
    assert main(["plot", str(out), "--out", str(replot)]) == 0


def test_from_csv_round_trip(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    main(
        ["sweep", "--problem", "caching", "--beta-grid", "0:1:0.5", "--tau-grid", "0.5", "--trials", "20", "--seed", "5"]
        + ["--generator", "zipf", "pages=8", "length=60", "exponent=0.8", "k=3", "--out", str(first)]
    )
    assert main(["sweep", "--from-csv", str(first), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


@pytest.mark.parametrize(
    "problem,beta,tau,extra,expected",
    [
        ("matching", "0", "0", [], "0.632120559"),
        ("caching", "1", "0.3", ["--k", "10"], "8.36848073"),
        ("mts", "0", "0.5", ["--n", "4"], "4.08333333"),
    ],
)
def test_bound_examples(tmp_path, problem, beta, tau, extra, expected):
    out = tmp_path / "b.csv"
    assert main(["bound", "--problem", problem, "--beta-grid", beta, "--tau-grid", tau, "--out", str(out)] + extra) == 0
    (row,) = rows(out)
    assert row["bound"] == expected
    assert row["endpoint"] == ("consistency" if beta == "0" else "robustness")


def test_grid_parsing():
    assert parse_grid("0:1:0.25") == [F(0), F(1, 4), F(1, 2), F(3, 4), F(1)]
    assert parse_grid("0:1:0.3") == [F(0), F(3, 10), F(3, 5), F(9, 10), F(1)]
    assert parse_grid("0.1") == [F(1, 10)]


def test_oracle_check_budget_exit(capsys):
    assert main(["oracle-check", "--budget", "10", "--trials", "0"]) == 2
    assert "budget" in capsys.readouterr().err


def test_oracle_check_passes_and_mutation_fails(monkeypatch):
    assert main(["oracle-check", "--trials", "2000", "--problem", "matching"]) == 0
    original = dtb.dtb_step
    monkeypatch.setattr(dtb, "dtb_step", lambda c, g, tau, e, a: original(c, g, min(1.0, float(tau) + 0.1), e, a))
    assert main(["oracle-check", "--trials", "20000", "--problem", "matching"]) == 1
