import csv
import re

import pytest
from click.testing import CliRunner

from boxmimo import boxdec
from boxmimo.cli import main, parse_snr_range


@pytest.fixture
def runner():
    return CliRunner()


BER_ARGS = ["ber", "--mimo", "4", "--qam", "16", "--detectors", "kbest,box-scp", "--k", "4", "--box", "4",
            "--snr", "8:0.5:24", "--seed", "1", "--min-errors", "20", "--no-timing", "--quiet"]


def test_snr_range_inclusive():
    assert parse_snr_range("8:0.5:24") == tuple(8 + 0.5 * i for i in range(33))
    assert parse_snr_range("0:0.1:0.3") == (0.0, 0.1, 0.2, 0.3)
    assert parse_snr_range("5:1:5") == (5.0,)
    for bad in ("1:2", "a:1:2", "5:0:6", "6:1:5", "0:-1:4"):
        with pytest.raises(ValueError):
            parse_snr_range(bad)


def test_ber_writes_all_rows(runner, tmp_path):
    out = tmp_path / "r.csv"
    res = runner.invoke(main, BER_ARGS + ["--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 33
    assert {r["detector"] for r in rows} == {"kbest", "box-scp"}
    assert sorted({float(r["snr_db"]) for r in rows}) == [8 + 0.5 * i for i in range(33)]
    assert "SNR@1e-3" in res.output and "box-scp" in res.output


def test_ber_is_reproducible(runner, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = BER_ARGS[:]
    args[args.index("8:0.5:24")] = "8:2:16"
    assert runner.invoke(main, args + ["--out", str(a)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(b), "--workers", "2"]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("change", [
    ["--qam", "8"],
    ["--detectors", "kbest,foo"],
    ["--detectors", "box-sicp"],
    ["--snr", "8:0:24"],
    ["--snr", "8-24"],
    ["--box", "8"],
    ["--mimo", "0"],
    ["--seed", "-3"],
    ["--bogus", "1"],
    ["--detectors", "box-icp", "--k", "2"],
    ["--ordering", "vblast"],
])
def test_ber_flag_errors_exit_2(runner, tmp_path, change):
    out = tmp_path / "r.csv"
    res = runner.invoke(main, BER_ARGS + ["--out", str(out)] + change)
    assert res.exit_code == 2, res.output
    assert "Usage:" in res.output
    assert not out.exists()


def test_ber_runtime_failure_exit_1(runner, tmp_path):
    res = runner.invoke(main, BER_ARGS + ["--out", str(tmp_path / "missing" / "r.csv"), "--snr", "8:1:8"])
    assert res.exit_code == 1


def test_ber_sicp_labels(runner, tmp_path):
    out = tmp_path / "r.csv"
    res = runner.invoke(main, ["ber", "--mimo", "4", "--qam", "4", "--detectors", "box-sicp", "--m", "1,2",
                               "--snr", "0:1:1", "--min-errors", "10", "--out", str(out), "--quiet"])
    assert res.exit_code == 0, res.output
    assert [r["detector"] for r in csv.DictReader(out.open())] == ["box-sicp1", "box-sicp2"] * 2


def test_ber_sorted_ordering(runner, tmp_path):
    out = tmp_path / "r.csv"
    res = runner.invoke(main, BER_ARGS + ["--out", str(out), "--snr", "20:2:22", "--ordering", "sorted"])
    assert res.exit_code == 0, res.output
    assert len(list(csv.DictReader(out.open()))) == 4


def _table(output):
    rows = {}
    for line in output.splitlines():
        m = re.match(r"(.+?)\s{2,}(.*)$", line)
        if m:
            rows[m.group(1).strip()] = m.group(2).split()
    return rows


def test_complexity_sicp_row(runner):
    res = runner.invoke(main, ["complexity", "--mimo", "8", "--qam", "16", "--k", "4", "--box", "4", "--m", "1,2,3"])
    assert res.exit_code == 0
    rows = _table(res.output)
    assert [rows[f"Box-SICP m={m}"][0] for m in (1, 2, 3)] == ["35", "38", "41"]
    assert rows["Box"] == ["65536"]
    assert rows["K-Best 16-QAM"] == ["464"] and rows["DKB"] == ["80"]


def test_complexity_full_table(runner):
    res = runner.invoke(main, ["complexity", "--mimo", "4,8", "--qam", "4,16,64"])
    rows = _table(res.output)
    assert rows["Box-SCP"] == ["16", "32"]
    assert rows["Box-ICP"] == ["22", "50"]
    assert rows["K-Best 4-QAM"] == ["52", "116"]
    assert rows["K-Best 64-QAM"] == ["832", "1856"]
    assert rows["Box-SICP m=1"] == ["19", "35"]
    assert rows["Box-SICP m=3"] == ["-", "41"]
    assert "116" in res.output and "100" in res.output


@pytest.mark.parametrize("args", [["--mimo", "4", "--qam", "5"], ["--mimo", "x", "--qam", "16"],
                                  ["--mimo", "4", "--qam", "16", "--box", "8"], ["--qam", "16"]])
def test_complexity_flag_errors(runner, args):
    assert runner.invoke(main, ["complexity"] + args).exit_code == 2


def test_check_default_passes(runner):
    res = runner.invoke(main, ["check"])
    assert res.exit_code == 0, res.output
    assert res.output.count("[PASS]") == 4


def test_check_box_ml_counts(runner):
    res = runner.invoke(main, ["check", "--suite", "box-ml", "--trials", "10000"])
    assert res.exit_code == 0
    assert "10000/10000 agreement" in res.output


def metric2_with_flipped_diagonal(delta1, dq):
    """Metric 2 with the d4 - d1 sign test negated."""
    col = dq - 2.0 * delta1.imag
    row = dq - 2.0 * delta1.real
    anti = delta1.imag - delta1.real
    diag = -(dq - delta1.real - delta1.imag)
    sign = {(1, 2): col, (1, 3): row, (1, 4): diag, (2, 3): anti, (2, 4): row, (3, 4): col}
    order = [1]
    for c in (2, 3, 4):
        pos = len(order)
        while pos > 0 and sign[(order[pos - 1], c)] < 0.0:
            pos -= 1
        order.insert(pos, c)
    return tuple(order)


def test_mutant_differs_only_when_s1_meets_s4():
    assert metric2_with_flipped_diagonal(1.1 + 1.3j, 2.0) == (2, 3, 1, 4)
    assert boxdec.metric2_order(1.1 + 1.3j, 2.0) == (4, 2, 3, 1)
    assert metric2_with_flipped_diagonal(0.4 + 0.7j, 2.0) == boxdec.metric2_order(0.4 + 0.7j, 2.0)


def test_check_catches_metric2_sign_flip(runner, monkeypatch, python_backend):
    monkeypatch.setattr(boxdec, "metric2_order", metric2_with_flipped_diagonal)
    res = runner.invoke(main, ["check", "--suite", "metric-signs", "--trials", "2000"])
    assert res.exit_code == 1
    assert "[FAIL] metric-signs" in res.output
    assert "delta1=" in res.output and "oracle" in res.output


@pytest.mark.parametrize("sub,flags", [
    ("ber", ["--mimo", "--qam", "--detectors", "--k", "--box", "--m", "--snr", "--seed", "--min-errors",
             "--max-trials", "--workers", "--out", "--no-timing", "--ordering", "--quiet"]),
    ("complexity", ["--mimo", "--qam", "--k", "--box", "--m"]),
    ("check", ["--suite", "--trials", "--seed"]),
])
def test_help_documents_every_flag(runner, sub, flags):
    res = runner.invoke(main, [sub, "--help"])
    assert res.exit_code == 0
    for f in flags:
        assert f in res.output
    assert all(p.help for p in main.commands[sub].params)
