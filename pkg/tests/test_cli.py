import json
import subprocess
import sys

import pytest

from cep.cli import main

PATTERN = """PATTERN SEQ(A a, B b, C c)
WHERE skip_till_any_match { a.price > 0 and b.price > 0 }
WITHIN 2 sec
"""

SPEC = {"rates": {"A": 40, "B": 8, "C": 2}, "count": 1500, "seed": 5}


@pytest.fixture
def files(tmp_path):
    pattern = tmp_path / "pattern.txt"
    pattern.write_text(PATTERN)
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    rates = tmp_path / "rates.json"
    rates.write_text(json.dumps(SPEC["rates"]))
    return tmp_path, pattern, spec, rates


def test_gen_then_run_both_modes(files, capsys):
    tmp, pattern, spec, rates = files
    stream = tmp / "stream.csv"
    assert main(["gen", "--spec", str(spec), "--out", str(stream)]) == 0

    m_eager = tmp / "eager.txt"
    m_lazy = tmp / "lazy.txt"
    assert main(["run", "--pattern", str(pattern), "--input", str(stream),
                 "--mode", "eager", "--matches-out", str(m_eager)]) == 0
    assert main(["run", "--pattern", str(pattern), "--input", str(stream),
                 "--mode", "lazy", "--rates", str(rates),
                 "--matches-out", str(m_lazy)]) == 0
    eager_lines = sorted(m_eager.read_text().splitlines())
    lazy_lines = sorted(m_lazy.read_text().splitlines())
    assert eager_lines == lazy_lines and eager_lines


def test_generate_inline_and_metrics(files):
    tmp, pattern, spec, _ = files
    metrics = tmp / "metrics.json"
    csv_out = tmp / "metrics.csv"
    assert main(["run", "--pattern", str(pattern), "--generate", str(spec),
                 "--mode", "lazy", "--metrics-out", str(metrics),
                 "--metrics-csv", str(csv_out)]) == 0
    report = json.loads(metrics.read_text())
    assert report["events_processed"] == SPEC["count"]
    assert report["memory_ops"]["buffer_insert"]["total"] > 0
    rows = csv_out.read_text().splitlines()
    assert any(row.startswith("lazy,throughput_eps,2000,") for row in rows)


def test_measure_rates_flag(files):
    tmp, pattern, spec, _ = files
    assert main(["run", "--pattern", str(pattern), "--generate", str(spec),
                 "--mode", "lazy", "--measure-rates", "500"]) == 0


def test_missing_rates_is_usage_error(files, capsys):
    tmp, pattern, spec, _ = files
    stream = tmp / "s.csv"
    main(["gen", "--spec", str(spec), "--out", str(stream)])
    rc = main(["run", "--pattern", str(pattern), "--input", str(stream),
               "--mode", "lazy"])
    assert rc == 2
    assert "rates" in capsys.readouterr().err


def test_fc_on_trailing_negation_is_build_error(files, capsys):
    tmp, _, spec, rates = files
    bad = tmp / "bad.pat"
    bad.write_text("PATTERN SEQ(A a, NOT(B b)) WITHIN 1 sec\n")
    rc = main(["run", "--pattern", str(bad), "--generate", str(spec),
               "--mode", "lazy-fc", "--rates", str(rates)])
    assert rc == 2
    assert "post-processing" in capsys.readouterr().err


def test_syntax_error_is_exit_2(files, capsys):
    tmp, _, spec, _ = files
    bad = tmp / "bad.pat"
    bad.write_text("PATTERN SEQ(A WITHIN 1 sec\n")
    assert main(["run", "--pattern", str(bad), "--generate", str(spec),
                 "--mode", "eager"]) == 2


def test_malformed_csv_is_exit_3(files, capsys):
    tmp, pattern, _, _ = files
    bad = tmp / "bad.csv"
    bad.write_text("seq,ts,type,stock,region,price,history\nx,y,A,s,A,1,1\n")
    assert main(["run", "--pattern", str(pattern), "--input", str(bad),
                 "--mode", "eager"]) == 3


def test_dedup_collapses_duplicate_lines(tmp_path):
    pattern = tmp_path / "dup.pat"
    # Both alternatives share roles {a, d}; with the negated middle types
    # absent, the same pair is reported once per branch.
    pattern.write_text(
        "PATTERN OR(SEQ(A a, NOT(B b), D d), SEQ(A a, NOT(C c), D d))\n"
        "WITHIN 2 sec\n")
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"rates": {"A": 2, "D": 2}, "count": 60,
                                "seed": 3}))
    rates = tmp_path / "rates.json"
    rates.write_text(json.dumps({"A": 2, "D": 2, "B": 1, "C": 1}))
    plain = tmp_path / "plain.txt"
    deduped = tmp_path / "dedup.txt"
    assert main(["run", "--pattern", str(pattern), "--generate", str(spec),
                 "--mode", "lazy", "--rates", str(rates),
                 "--matches-out", str(plain)]) == 0
    assert main(["run", "--pattern", str(pattern), "--generate", str(spec),
                 "--mode", "lazy", "--rates", str(rates), "--dedup",
                 "--matches-out", str(deduped)]) == 0
    plain_lines = plain.read_text().splitlines()
    dedup_lines = deduped.read_text().splitlines()
    assert plain_lines
    assert len(dedup_lines) == len(set(plain_lines))
    assert len(plain_lines) == 2 * len(dedup_lines)


def test_window_override(files):
    tmp, pattern, spec, rates = files
    out_small = tmp / "small.json"
    assert main(["run", "--pattern", str(pattern), "--generate", str(spec),
                 "--mode", "lazy", "--rates", str(rates),
                 "--window", "1msec", "--metrics-out", str(out_small)]) == 0
    small = json.loads(out_small.read_text())
    out_big = tmp / "big.json"
    assert main(["run", "--pattern", str(pattern), "--generate", str(spec),
                 "--mode", "lazy", "--rates", str(rates),
                 "--window", "4sec", "--metrics-out", str(out_big)]) == 0
    big = json.loads(out_big.read_text())
    assert small["matches"] <= big["matches"]


def test_difftest_command(capsys):
    assert main(["difftest", "--cases", "60", "--seed", "12",
                 "--max-events", "15"]) == 0
    assert "all modes agree" in capsys.readouterr().out


def test_console_script_entrypoint():
    proc = subprocess.run([sys.executable, "-m", "cep.cli", "difftest",
                           "--cases", "5", "--seed", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
