import csv
import json
import subprocess
import sys

import pytest

from helpers import random_stream
from lobcushion.cli import build_parser, main, roundtrip
from lobcushion.events import write_events
from lobcushion.simulator import SimParams, format_config

SUBCOMMANDS = ("simulate", "reconstruct", "analyze", "fit", "validate", "roundtrip")


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    params = SimParams.default_session(N=12_000, T_ms=1_000_000, seed=2)
    (d / "run.cfg").write_text(format_config(params))
    assert main(["simulate", "--config", str(d / "run.cfg"), "--out", str(d / "ev.csv"),
                 "--report", str(d / "report.json")]) == 0
    return d


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_report(workdir):
    report = json.loads((workdir / "report.json").read_text())
    assert report["rng_family"] == "numpy.PCG64"
    assert report["draws"] == 12_000


def test_validate_exit_codes(workdir, tmp_path):
    assert main(["validate", "--events", str(workdir / "ev.csv")]) == 0
    bad = tmp_path / "bad.csv"
    lines = (workdir / "ev.csv").read_text().splitlines()
    bad.write_text("\n".join(lines[:50] + ["999999999,C,424242,B,2339,205"]) + "\n")
    assert main(["validate", "--events", str(bad)]) == 2
    garbled = tmp_path / "garbled.csv"
    garbled.write_text(lines[0] + "\n1,A,1,B,zero,5\n")
    assert main(["validate", "--events", str(garbled)]) == 2
    assert main(["validate", "--events", str(tmp_path / "missing.csv")]) == 3


def test_usage_errors(workdir):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["validate"]) == 1
    assert main(["analyze", "bogus", "--events", "x", "--out", "y"]) == 1
    assert main(["validate", "--events", str(workdir / "ev.csv"), "--nope"]) == 1


def test_malformed_config_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("N = 10\nspeed = 3\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 1


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_documents_flags(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    out = capsys.readouterr().out
    sub = next(a for a in build_parser()._actions if a.dest == "command").choices[cmd]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in out


def test_occupation_csv_header(workdir):
    out = workdir / "occ.csv"
    assert main(["analyze", "occupation", "--events", str(workdir / "ev.csv"), "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["p_rel_half_ticks", "o_av"]
    occ = {int(r[0]): float(r[1]) for r in rows[1:]}
    assert occ[0] == 0.0 and max(occ.values()) <= 1.0


@pytest.mark.parametrize(
    "what, extra",
    [
        ("lifetimes", ["--weight", "volume"]),
        ("volumes", ["--weight", "lifetime"]),
        ("relprices", ["--weight", "lifetime-volume"]),
        ("returns", ["--delta-ms", "2000"]),
        ("spread", []),
        ("levels", []),
        ("grid", ["--sample-ms", "5000", "--bin-ticks", "3"]),
        ("filling", []),
        ("summary", []),
    ],
)
def test_analyses_write_csv_with_header(workdir, what, extra):
    out = workdir / f"{what}.csv"
    assert main(["analyze", what, "--events", str(workdir / "ev.csv"), "--out", str(out)] + extra) == 0
    rows = _rows(out)
    assert rows and rows[0] and len(rows) > 1


def test_icdf_regime_contributions_sum_to_total(workdir):
    out = workdir / "vol_icdf.csv"
    assert main(["analyze", "lifetimes", "--events", str(workdir / "ev.csv"), "--out", str(out),
                 "--weight", "volume", "--width", "6"]) == 0
    rows = _rows(out)
    head = rows[0]
    i = head.index("icdf")
    parts = [head.index(c) for c in ("icdf_cushion", "icdf_distant", "icdf_unclassified")]
    for r in rows[1:]:
        assert float(r[i]) == pytest.approx(sum(float(r[j]) for j in parts), abs=1e-12)


def test_outputs_are_idempotent(workdir):
    a, b = workdir / "s1.csv", workdir / "s2.csv"
    for path in (a, b):
        assert main(["analyze", "spread", "--events", str(workdir / "ev.csv"), "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_refuses_to_overwrite_input(workdir):
    ev = workdir / "ev.csv"
    before = ev.read_bytes()
    assert main(["analyze", "spread", "--events", str(ev), "--out", str(ev)]) == 1
    assert ev.read_bytes() == before


def test_reconstruct_and_fit(workdir):
    q, d = workdir / "quotes.csv", workdir / "depth.csv"
    assert main(["reconstruct", "--events", str(workdir / "ev.csv"), "--quotes-out", str(q),
                 "--depth-out", str(d), "--sample-ms", "10000", "--window-ticks", "10"]) == 0
    assert len(_rows(q)) > 2 and len(_rows(d)) > 2
    fit_out = workdir / "fit.csv"
    assert main(["fit", "--events", str(workdir / "ev.csv"), "--warmup-ms", "30000", "--out", str(fit_out)]) == 0
    fit = {r[0]: r[1] for r in _rows(fit_out)[1:]}
    assert float(fit["l0"]) == pytest.approx(3.045, rel=0.2)


def test_analysis_window_must_be_ordered(workdir):
    assert main(["analyze", "spread", "--events", str(workdir / "ev.csv"), "--out", str(workdir / "w.csv"),
                 "--open-ms", "500", "--close-ms", "100"]) == 1


def test_roundtrip_report(tmp_path):
    params = SimParams.default_session(N=20_000, T_ms=1_710_000, seed=4)
    report = roundtrip(params, workdir=str(tmp_path))
    cmp = report["comparison"]
    assert set(cmp) == {"l0", "t_lt_ms", "l_lt", "market_share", "cushion_width_ticks"}
    assert abs(cmp["l0"]["relative_error"]) < 0.1
    assert cmp["cushion_width_ticks"]["configured"] == 49


def test_roundtrip_without_market_orders(tmp_path):
    params = SimParams.default_session(N=5000, T_ms=430_000, P_market=0.0, seed=4)
    assert roundtrip(params)["comparison"]["market_share"]["fitted"] == 0.0


def test_roundtrip_cli_stage_failure(tmp_path, capsys):
    cfg = tmp_path / "empty.cfg"
    # no orders at all: the book never has a quote to analyze
    cfg.write_text(format_config(SimParams.default_session(N=0, initial_orders_per_tick=0)))
    assert main(["roundtrip", "--config", str(cfg), "--out", str(tmp_path / "r.json")]) == 4
    assert "'analyze'" in capsys.readouterr().err
    assert not (tmp_path / "r.json").exists()


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "lobcushion", "validate", "--events", str(workdir / "ev.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 0


def test_user_supplied_stream(tmp_path):
    path = tmp_path / "rand.csv"
    write_events(random_stream(3000, seed=1), path)
    out = tmp_path / "occ.csv"
    assert main(["analyze", "occupation", "--events", str(path), "--out", str(out), "--range-ticks", "5"]) == 0
    assert len(_rows(out)) == 22
