import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sistables import experiments as ex
from sistables.cli import main
from sistables.margins import make_one_heavy
from sistables.sampler import SamplerConfig, trial_log_weights


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "sistables", *map(str, args)],
                          capture_output=True, text=True)


def test_count_outputs(capsys):
    assert main(["count", "--family", "one-heavy", "--m", "3", "--d", "2"]) == 0
    out = capsys.readouterr().out
    assert "count: 60\n" in out and "6.000 × 10^1" in out
    assert main(["count", "--family", "two-heavy", "--m", "300", "--d-r", "179",
                 "--d-c", "240"]) == 0
    out = capsys.readouterr().out
    assert "9.684 × 10^205" in out and "count: " not in out  # more than 40 digits
    for method in ("brute", "dp", "closed_form", "auto"):
        assert main(["count", "--rows", "1,1,1,2", "--cols", "1,1,1,1,1", "--method", method]) == 0
        assert "count: 60\n" in capsys.readouterr().out


@pytest.mark.parametrize("args, code", [
    (["count", "--rows", "1,1", "--cols", "1"], 2),
    (["count", "--rows", "2,2", "--cols", "2,2", "--method", "closed_form"], 2),
    (["estimate", "--rows", "2,2,0", "--cols", "3,1,0", "--trials", "5"], 3),
    (["count", "--family", "regular", "--n", "12", "--r", "6", "--method", "brute"], 4),
    (["count", "--family", "two-heavy", "--m", "3", "--d-r", "1", "--d-c", "4"], 3),
    (["theory", "--family", "one-heavy", "--beta", "-1"], 2),
    (["estimate", "--family", "regular", "--n", "4"], 2),
    (["count", "--bogus"], 2),
])
def test_exit_codes(args, code, tmp_path):
    r = run_cli(*args, *(["--out", tmp_path] if args[0] == "estimate" else []))
    assert r.returncode == code, r.stderr


def test_restart_variant_on_infeasible_reports_failures(tmp_path, capsys):
    assert main(["estimate", "--rows", "2,2,0", "--cols", "3,1,0", "--variant", "restart",
                 "--trials", "20", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["runs"][0]["failures"] == 20
    assert summary["runs"][0]["final_log10_estimate"] == -math.inf


def test_estimate_one_heavy_within_three_sigma(tmp_path):
    assert main(["estimate", "--family", "one-heavy", "--m", "3", "--d", "2", "--trials", "1000",
                 "--seed", "11", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    est = 10 ** summary["runs"][0]["final_log10_estimate"]
    logw, _ = trial_log_weights(make_one_heavy(3, 2), SamplerConfig(seed=11), 0, 1000)
    w = np.exp(logw)
    assert est == pytest.approx(w.mean(), rel=1e-9)
    se = w.std(ddof=1) / math.sqrt(1000)
    assert se > 0 and abs(est - 60) <= 3 * se


def test_zero_variance_trace(tmp_path):
    assert main(["estimate", "--rows", "1,1,1,1", "--cols", "1,1,1,1", "--trials", "50",
                 "--out", str(tmp_path)]) == 0
    runs = ex.read_trace_csv((tmp_path / "trace.csv").read_text())
    assert all(v == pytest.approx(math.log10(24), abs=1e-10) for v in runs[0]["log10_estimate"])


def test_trace_schema_and_determinism(tmp_path):
    args = ["estimate", "--family", "regular", "--n", "8", "--r", "3", "--trials", "3000",
            "--seed", "42", "--runs", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "trace.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "run,trial,log10_estimate,failures,stopped"
    runs = ex.read_trace_csv(a.decode())
    assert set(runs) == {0, 1}
    for d in runs.values():
        assert d["trial"] == list(range(1, 3001))
        flags = d["stopped"]
        assert flags == sorted(flags)  # once stopped, stays stopped


def test_stop_heuristic_mode(tmp_path):
    assert main(["estimate", "--family", "two-heavy", "--m", "12", "--beta", "0.6", "--gamma",
                 "0.8", "--stop-heuristic", "--order", "desc", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    run = s["runs"][0]
    assert run["stop_trial"] == run["trials"] >= 5 * (13 + 9)
    assert s["mode"] == "stop-heuristic"


def test_trace_striding():
    idx = ex.trace_indices(250_000, keep=[12_345])
    assert idx[-1] == 250_000 and 12_345 in idx
    assert len(idx) <= ex.STRIDE_ROWS + 2
    assert np.all(np.diff(idx) > 0)
    assert len(ex.trace_indices(1000)) == 1000


def test_config_file(tmp_path, capsys):
    cfg = {"version": 1, "instance": {"family": "one-heavy", "m": 3, "d": 2},
           "sampler": {"variant": "restart", "ordering": "descending_sum"},
           "estimator": {"epsilon": 0.02, "k": 3}, "trials": 200, "seed": 5,
           "out": str(tmp_path), "formats": ["csv"]}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    assert main(["estimate", "--config", str(path)]) == 0
    assert (tmp_path / "trace.csv").exists() and not (tmp_path / "summary.json").exists()
    parsed = ex.config_from_dict(cfg)
    assert ex.config_from_dict(ex.config_to_dict(parsed)) == parsed
    for bad in ({**cfg, "version": 2}, {**cfg, "extra": 1},
                {**cfg, "sampler": {"variant": "restart", "speed": 3}},
                {**cfg, "instance": {"family": "one-heavy", "m": 3, "d": 2, "x": 1}}):
        path.write_text(json.dumps(bad))
        assert main(["estimate", "--config", str(path)]) == 2


def test_recognize_family():
    assert ex.recognize_family(make_one_heavy(3, 2)) == ("one-heavy", 3, 2)
    from sistables.margins import make_two_heavy, make_regular
    assert ex.recognize_family(make_two_heavy(5, 3, 4)) == ("two-heavy", 5, 3, 4)
    assert ex.recognize_family(make_regular(4, 2)) is None
    c, method = ex.exact_count(make_two_heavy(5, 3, 4))
    assert method == "closed_form" and c == ex.exact_count(make_two_heavy(5, 3, 4), "dp")[0]


def test_fig1_panel_a(tmp_path, capsys):
    out = tmp_path / "a"
    assert main(["fig1", "--family", "regular", "--n", "8", "--r", "3", "--runs", "2",
                 "--out", str(out)]) == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["fig1a.svg", "fig1a_run0.csv", "fig1a_run1.csv", "fig1a_summary.csv"]
    svg = ex.fig1_chart("a", [(out / f).read_text() for f in ("fig1a_run0.csv", "fig1a_run1.csv")],
                        (out / "fig1a_summary.csv").read_text(),
                        title="regular(n=8, r=3)")
    assert svg == (out / "fig1a.svg").read_text()
    assert "exact" in svg and "<polyline" in svg


def test_fig1_panel_b(tmp_path):
    out = tmp_path / "b"
    assert main(["fig1", "--family", "two-heavy", "--m", "10", "--beta", "0.6", "--gamma", "0.8",
                 "--runs", "1", "--out", str(out)]) == 0
    summary = (out / "fig1b_summary.csv").read_text().splitlines()
    assert summary[0] == ",".join(ex.FIG1_SUMMARY_HEADER)
    settings = [line.split(",")[1] for line in summary[1:]]
    assert settings == ["column_wise/descending_sum", "row_wise/descending_sum",
                        "column_wise/ascending_sum"]
    assert (out / "fig1b.svg").exists()


def test_fig1_errors(tmp_path):
    assert main(["fig1", "--family", "two-heavy", "--m", "10", "--beta", "0.5", "--gamma", "0.5",
                 "--out", str(tmp_path)]) == 2
    assert main(["fig1", "--family", "one-heavy", "--m", "3", "--d", "2",
                 "--out", str(tmp_path)]) == 2
    assert main(["fig1", "--family", "regular", "--n", "5", "--r", "2", "--runs", "0",
                 "--out", str(tmp_path)]) == 2


def test_fig2(tmp_path, caplog):
    with caplog.at_level("WARNING"):
        assert main(["fig2", "--ns", "10,12", "--runs", "3", "--families", "5,5log,half",
                     "--out", str(tmp_path)]) == 0
    assert "clamped" in caplog.text
    rows = (tmp_path / "fig2.csv").read_text().splitlines()
    assert rows[0] == ",".join(ex.FIG2_HEADER)
    assert len(rows) == 1 + 6
    half10 = [r for r in rows if r.startswith("half,10,")][0]
    assert half10.split(",")[2] == "5"
    log10 = [r for r in rows if r.startswith("5log,10,")][0]
    assert log10.split(",")[2] == "10"
    assert all(float(r.split(",")[3]) > 0 for r in rows[1:])
    assert ex.fig2_chart((tmp_path / "fig2.csv").read_text()) == (tmp_path / "fig2.svg").read_text()


def test_fig3(tmp_path):
    assert main(["fig3", "--sizes", "20,40", "--runs", "2", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "fig3.csv").read_text().splitlines()
    assert rows[0] == ",".join(ex.FIG3_HEADER) and len(rows) == 1 + 8
    assert "0.5,0.5," in "\n".join(rows)
    for name in ("fig3_linear.svg", "fig3_log.svg"):
        assert (tmp_path / name).read_text().startswith("<svg")
    m, d_r, d_c = ex.two_heavy_for_size(40, 0.6, 0.8)
    assert abs(m + (m + d_r - d_c) - 40) <= 1


def test_theory_cli(capsys):
    assert main(["theory", "--family", "one-heavy", "--beta", "1"]) == 0
    out = capsys.readouterr().out
    assert "gap" in out and "0.166666666667" in out
    assert main(["theory", "--family", "two-heavy", "--beta", "0.5", "--gamma", "0.5",
                 "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["values"]["gap"] == 0 and "no separation" in data["notes"][0]
    assert main(["theory", "--family", "two-heavy", "--beta", "0.6", "--gamma", "0.8",
                 "--m", "300"]) == 0
    out = capsys.readouterr().out
    assert "-0.0441176" in out and "note:" in out
