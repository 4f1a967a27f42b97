import csv
import io
import json
import math

import pytest

from corpus import np_pkb_z, random_small_pkb, rel_close
from ptp.cli import main
from ptp.generators import link_prediction_pkb, random_pkb, random_query
from ptp.io import (ParseError, parse_evidence, parse_model, parse_wcnf, print_evidence, print_model,
                    log_wmc_dimacs)
from ptp.logic import UnsupportedFeature
from ptp.pkb import add_evidence, log_partition_function

TOY = """\
# one soft formula over three objects
domain D = 3
predicate R(D)
0.5 R(x)
"""


def test_parse_toy():
    k = parse_model(TOY)
    assert k.domains["D"].size == 3
    assert len(k.formulas) == 1 and k.formulas[0].phi == 0.5


def test_grammar_variants():
    k = parse_model("domain p = 4 {Ann, Bob}\ndomain c = {Rome, Oslo}\npredicate F(p, c)\npredicate G\n"
                    "hard F(Ann, x) => G\nw 1.5 !F(y, Rome) v G\n0.2 F(x,y) <=> (G ^ F(x, Oslo))\n")
    assert k.domains["p"].names == ["Ann", "Bob"] and k.domains["p"].size == 4
    assert k.domains["c"].explicit
    assert k.formulas[0].phi == 0.0
    assert k.formulas[1].phi == pytest.approx(math.exp(-1.5))


@pytest.mark.parametrize("text,line", [
    ("domain D = 3\npredicate R(D)\n0.5 R(x", 3),
    ("domain D = 3\npredicate R(E)\n", 2),
    ("domain D = 3\npredicate R(D)\n-1 R(x)\n", 3),
    ("domain D = {A}\npredicate R(D)\n0.5 R(B)\n", 3),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(Exception) as ei:
        parse_model(text)
    assert getattr(ei.value, "line", line) == line


def test_existential_unsupported():
    with pytest.raises((UnsupportedFeature, ParseError)):
        parse_model("domain D = 2\npredicate R(D)\n0.5 exists x R(x)\n")


def test_round_trip_preserves_z():
    for seed in range(60):
        k, ev, _ = random_small_pkb(seed)
        k2 = parse_model(print_model(k))
        ev2 = parse_evidence(print_evidence(ev), k2)
        a = np_pkb_z(add_evidence(k, ev))
        b = np_pkb_z(add_evidence(k2, ev2))
        assert rel_close(a, b), seed


def test_wcnf_format():
    n, cl, w = parse_wcnf("p cnf 2 1\nw 1 2.0 0.5\n1 2 0\n")
    assert (n, cl) == (2, [(1, 2)])
    v, _ = log_wmc_dimacs(n, cl, w)
    # worlds: 11 -> 2, 10 -> 2*1, 01 -> 0.5
    assert math.exp(v) == pytest.approx(4.5, rel=1e-12)


def test_generators_are_deterministic():
    a = random_pkb(10, 10, 3, 4, 8, seed=5)
    b = random_pkb(10, 10, 3, 4, 8, seed=5)
    assert print_model(a[0]) == print_model(b[0]) and a[1] == b[1]
    assert random_query(a[0], 2) == random_query(b[0], 2)
    c = random_pkb(10, 10, 3, 4, 8, seed=6)
    assert print_model(a[0]) != print_model(c[0])
    k1, e1 = link_prediction_pkb(4, 4, 0.5, seed=1)
    k2, e2 = link_prediction_pkb(4, 4, 0.5, seed=1)
    assert e1 == e2 and len(e1) == round(0.5 * 12)


def test_random_pkb_shape():
    k, ev = random_pkb(6, 5, 3, 4, 7, seed=0)
    assert len(k.formulas) == 5 and len(ev) == 4
    assert all(0.0 < wf.phi < 1.0 for wf in k.formulas)
    with pytest.raises(ValueError):
        random_pkb(2, 1, 3, 0, 1)


@pytest.fixture
def toy(tmp_path):
    p = tmp_path / "toy.pkb"
    p.write_text(TOY)
    return p


def test_cli_query(toy, capsys):
    assert main(["query", "-m", str(toy), "-q", "R(A)"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(2 / 3, abs=1e-6)


def test_cli_reports(toy, capsys):
    assert main(["query", "-m", str(toy), "-q", "R(A)", "--report", "json"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["answer"] == pytest.approx(2 / 3, rel=1e-12)
    assert {"log_z_num", "log_z_den", "calls", "cache_hits", "cache_misses", "wall_ms", "seed"} <= set(row)
    assert main(["z", "-m", str(toy), "--report", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert float(rows[0]["answer"]) == pytest.approx(3.375, rel=1e-12)


def test_cli_flags_do_not_change_answer(toy, capsys):
    for flags in ([], ["--no-cache"], ["--no-lifting"], ["--no-unit-prop"], ["--prune"], ["--cache-mb", "1"]):
        assert main(["query", "-m", str(toy), "-q", "R(A)", "--report", "json", *flags]) == 0
        assert json.loads(capsys.readouterr().out)["answer"] == pytest.approx(2 / 3, rel=1e-12)


def test_cli_sampled(toy, capsys):
    assert main(["sample", "-m", str(toy), "-q", "R(A)", "--samples", "500", "--report", "json"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert 0.0 <= row["answer"] <= 1.0


def test_cli_exit_codes(tmp_path, toy, capsys):
    assert main(["query"]) == 1
    assert main(["query", "-m", str(tmp_path / "missing.pkb"), "-q", "R(A)"]) == 1
    bad = tmp_path / "bad.pkb"
    bad.write_text("domain D = 2\npredicate R(D)\n0.5 R(x\n")
    assert main(["query", "-m", str(bad), "-q", "R(A)"]) == 2
    inc = tmp_path / "inc.pkb"
    inc.write_text("domain D = 2\npredicate R(D)\nhard R(x)\nhard !R(A)\n")
    assert main(["query", "-m", str(inc), "-q", "R(A)"]) == 3
    hard = tmp_path / "chain.pkb"
    hard.write_text("domain D = 6\npredicate R(D)\npredicate S(D, D)\n0.5 R(x) v S(x, y)\n0.3 S(x, y) => R(y)\n")
    assert main(["query", "-m", str(hard), "-q", "R(A)", "--max-calls", "3"]) == 4
    capsys.readouterr()


def test_cli_wmc_and_generators(tmp_path, capsys):
    f = tmp_path / "f.cnf"
    f.write_text("p cnf 2 1\n1 2 0\n")
    assert main(["wmc", str(f)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(3.0, abs=1e-6)
    out = tmp_path / "r"
    assert main(["gen-random", "--n", "5", "--m", "4", "--s", "2", "--c", "6", "-o", str(out)]) == 0
    capsys.readouterr()
    assert main(["query", "-m", str(out.with_suffix(".pkb")), "-e", str(out.with_suffix(".db")),
                 "-q", out.with_suffix(".query").read_text().strip()]) in (0, 3)
    assert main(["gen-linkpred", "--profs", "3", "--students", "3", "-o", str(tmp_path / "l")]) == 0


def test_cli_bench(capsys):
    assert main(["bench", "random", "--n", "5", "--m", "5", "--s", "2", "--c", "4,6"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 2 and all(r["calls"] for r in rows)


def test_generated_model_matches_lifted_count(tmp_path):
    k, ev = random_pkb(4, 4, 2, 2, 3, seed=11)
    k2 = parse_model(print_model(k))
    assert rel_close(log_partition_function(add_evidence(k, ev)),
                     log_partition_function(add_evidence(k2, parse_evidence(print_evidence(ev), k2))))
