import csv
import math

import numpy as np
import pytest

from fusionscale import cli, experiment
from fusionscale.cliques import NonScalableRegimeError
from fusionscale.experiment import (
    ROW_FIELDS,
    ConfigError,
    ExperimentConfig,
    parse_config,
    read_rows,
    run_sweep,
    summarize,
)
from fusionscale.placement import sample_deployment

SMOKE = """\
# two-node smoke run
name = smoke
policies = DT, SP, MST_AGG, DFMRF
dependency = knng
k = 1
n = 2
runs = 1
"""

SMALL = """\
name = small
policies = SP, MST_AGG, DFMRF
dependency = none, knng, disc
k = 1, 2
delta = 0, 0.6
placement = uniform, 5
nu = 2, 3
n = 10:30:10
runs = 3
seed = 7
"""


def write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_config():
    cfg = parse_config(SMALL)
    assert cfg.n == [10, 20, 30]
    assert cfg.placement == [0.0, 5.0]
    assert cfg.dep_cells() == [("none", 0), ("knng", 1), ("knng", 2), ("disc", 0.0), ("disc", 0.6)]
    cfg = parse_config("lambda = 2\nproc_mode = min_index\nplots = no\n")
    assert cfg.lam == 2.0 and cfg.proc_mode == "min_index" and cfg.plots is False


@pytest.mark.parametrize("text", ["runs = 0", "policies = FLOOD", "lambda = -1", "n = 1",
                                  "colour = red", "k = 12\nn = 10", "placement = 80",
                                  "network = mesh", "network = disc:x", "runs = many",
                                  "just some words", "nu = ", "proc_mode = random", "u = 0.5"])
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_smoke_totals_by_hand(tmp_path):
    out = run_sweep(parse_config(SMOKE), tmp_path, plots=False)
    rows = read_rows(out["runs"])
    assert [r["policy"] for r in rows] == ["DT", "SP", "MST_AGG", "DFMRF"]
    d2 = float(np.sum(np.diff(sample_deployment(2, 1.0, seed=0, stream=(2, 0, experiment._placement_key(0.0))).points, axis=0) ** 2))
    totals = [float(r["total"]) for r in rows]
    assert totals[:3] == pytest.approx([d2] * 3, rel=1e-8)
    # both nodes share the one clique: one forwarding hop plus one aggregation hop
    assert totals[3] == pytest.approx(2 * d2, rel=1e-8)


def test_csv_schema_and_formatting(tmp_path):
    out = run_sweep(parse_config(SMALL), tmp_path, plots=False)
    text = out["runs"].read_text()
    assert text.endswith("\n")
    lines = text.splitlines()
    assert lines[0] == ",".join(ROW_FIELDS)
    cfg = parse_config(SMALL)
    assert len(lines) - 1 == len(cfg.n) * len(cfg.nu) * 5 * 2 * 3 * 3
    for r in read_rows(out["runs"]):
        for key in ("fg_energy", "ag_energy", "total", "average"):
            assert len(r[key].replace("-", "").replace(".", "").lstrip("0").split("e")[0]) <= 9
        assert r["status"] == "ok"
        assert math.isclose(float(r["average"]) * int(r["n"]), float(r["total"]), rel_tol=1e-8)


def test_summary_matches_raw_rows(tmp_path):
    out = run_sweep(parse_config(SMALL), tmp_path, plots=False)
    rows = read_rows(out["runs"])
    summary = read_rows(out["summary"])
    assert summary == [{k: v for k, v in s.items()} for s in summarize(rows)]
    for s in summary:
        vals = [float(r["average"]) for r in rows
                if all(r[k] == s[k] for k in ("n", "nu", "policy", "dep_kind", "dep_param", "placement_a"))]
        assert s["mean_average"] == experiment.fmt(math.fsum(vals) / len(vals))
        assert int(s["runs"]) == len(vals) == 3


def test_independent_and_zero_disc_cells_equal_mst(tmp_path):
    rows = read_rows(run_sweep(parse_config(SMALL), tmp_path, plots=False)["runs"])
    mst = {(r["n"], r["nu"], r["placement_a"], r["run"]): r["total"] for r in rows
           if r["policy"] == "MST_AGG" and r["dep_kind"] == "none"}
    for r in rows:
        if r["policy"] == "DFMRF" and (r["dep_kind"] == "none" or r["dep_param"] == "0"):
            assert r["total"] == mst[(r["n"], r["nu"], r["placement_a"], r["run"])]


def test_same_seed_same_bytes(tmp_path, monkeypatch):
    cfg = parse_config(SMALL)
    a = run_sweep(cfg, tmp_path / "a", plots=False)
    b = run_sweep(cfg, tmp_path / "b", plots=False)
    monkeypatch.setenv("FUSIONSCALE_THREADS", "2")
    c = run_sweep(cfg, tmp_path / "c", plots=False)
    for key in ("runs", "summary"):
        assert a[key].read_bytes() == b[key].read_bytes() == c[key].read_bytes()
    other = run_sweep(parse_config(SMALL.replace("seed = 7", "seed = 8")), tmp_path / "d", plots=False)
    assert other["runs"].read_bytes() != a["runs"].read_bytes()


def test_deployments_shared_across_cells(tmp_path):
    rows = read_rows(run_sweep(parse_config(SMALL), tmp_path, plots=False)["runs"])
    sp = {}
    for r in rows:
        if r["policy"] == "SP":
            sp.setdefault((r["n"], r["nu"], r["placement_a"], r["run"]), set()).add(r["total"])
    assert all(len(v) == 1 for v in sp.values())


def test_clique_cap_flags_row(tmp_path, monkeypatch):
    def boom(g, cap=None):
        raise NonScalableRegimeError("too many")

    monkeypatch.setattr(experiment, "maximal_cliques", boom)
    rows = read_rows(run_sweep(parse_config(SMOKE), tmp_path, plots=False)["runs"])
    flagged = [r for r in rows if r["policy"] == "DFMRF"]
    assert [r["status"] for r in flagged] == ["clique_cap"]
    assert flagged[0]["total"] == "nan"
    assert all(r["status"] == "ok" for r in rows if r["policy"] != "DFMRF")


def test_cli_simulate_writes_files_and_figures(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    code = cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--runs", "2"])
    assert code == 0
    produced = {p.name for p in (tmp_path / "o").iterdir()}
    assert {"small_runs.csv", "small_summary.csv", "small_energy_vs_n.png",
            "small_ratio_vs_n.png", "small_energy_vs_nu.png", "small_energy_vs_delta.png"} <= produced
    assert (tmp_path / "o" / "small_energy_vs_n.png").read_bytes()[:4] == b"\x89PNG"
    rows = read_rows(tmp_path / "o" / "small_runs.csv")
    assert max(int(r["run"]) for r in rows) == 1


def test_cli_seed_override(tmp_path):
    cfg = write(tmp_path, SMOKE)
    cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a"), "--no-plots"])
    cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--no-plots", "--seed", "3"])
    assert (tmp_path / "a/smoke_runs.csv").read_text() != (tmp_path / "b/smoke_runs.csv").read_text()


@pytest.mark.parametrize("argv", [["simulate", "--config", "/nonexistent.cfg"],
                                  ["simulate", "--runs", "0"],
                                  ["simulate", "--policies", "FLOOD"],
                                  ["frobnicate"],
                                  ["zeta", "--kind", "tree"],
                                  ["zeta", "--kind", "mst", "--nu", "two"],
                                  ["zeta", "--kind", "mst", "--window", "5"]])
def test_cli_config_errors_exit_2(argv, capsys):
    assert cli.main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_cli_zeta_appends(tmp_path, capsys):
    table = tmp_path / "z.txt"
    assert cli.main(["zeta", "--kind", "knng", "--k", "2", "--nu", "0,2", "--reps", "5",
                     "--window", "20", "--table", str(table)]) == 0
    assert cli.main(["zeta", "--kind", "mst", "--nu", "2", "--reps", "5", "--window", "20",
                     "--table", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0].startswith("# fusionscale zeta-table v1")
    assert [ln.split()[:3] for ln in lines[1:]] == [["knng", "2", "0"], ["knng", "2", "2"], ["mst", "0", "2"]]
    assert capsys.readouterr().out.count("\n") == 3


def test_doubling_reps_shrinks_stderr(tmp_path):
    table = tmp_path / "z.txt"
    for reps in ("100", "200"):
        cli.main(["zeta", "--kind", "knng", "--k", "1", "--nu", "2", "--reps", reps,
                  "--window", "20", "--table", str(table)])
    se = [float(line.split()[5]) for line in table.read_text().splitlines()[1:]]
    assert 0.55 < se[1] / se[0] < 0.9


BOUNDS = """\
name = b
policies = MST_AGG, DFMRF
dependency = none, knng, disc
k = 1
delta = 0.6
placement = 0, 5, -5
n = 20
runs = 2
"""


def _table(tmp_path, with_knng=True):
    t = tmp_path / "zt.txt"
    lines = ["# fusionscale zeta-table v1: kind param nu intensity mean stderr replicates seed",
             "mst 0 2 1 0.505 0.009 1500 0"]
    if with_knng:
        lines.append("knng 1 2 1 0.271 0.007 1500 0")
    t.write_text("\n".join(lines) + "\n")
    return t


def test_cli_bounds(tmp_path):
    cfg = write(tmp_path, BOUNDS)
    out = tmp_path / "o"
    assert cli.main(["bounds", "--config", str(cfg), "--zeta-table", str(_table(tmp_path)),
                     "--out", str(out)]) == 0
    with open(out / "b_bounds.csv") as fh:
        recs = list(csv.DictReader(fh))
    assert len(recs) == 3 * 3
    for r in recs:
        assert float(r["mst_lower"]) <= float(r["dfmrf_upper"])
        assert not math.isnan(float(r["measured_dfmrf"]))
    assert {r["rho"] for r in recs if r["dep_kind"] == "none"} == {"1"}
    knng_rho = {r["rho"] for r in recs if r["dep_kind"] == "knng"}
    assert len(knng_rho) == 1
    assert float(knng_rho.pop()) == pytest.approx(1 + 0.271 / 0.505)
    assert (out / "b_bounds.png").exists()


def test_cli_bounds_reuses_summary(tmp_path):
    cfg = write(tmp_path, BOUNDS)
    sweep = run_sweep(parse_config(BOUNDS), tmp_path / "s", plots=False)
    assert cli.main(["bounds", "--config", str(cfg), "--zeta-table", str(_table(tmp_path)),
                     "--summary", str(sweep["summary"]), "--out", str(tmp_path / "o"), "--no-plots"]) == 0
    assert not (tmp_path / "o" / "b_runs.csv").exists()


def test_cli_bounds_missing_zeta_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, BOUNDS)
    code = cli.main(["bounds", "--config", str(cfg), "--zeta-table",
                     str(_table(tmp_path, with_knng=False)), "--out", str(tmp_path / "o")])
    assert code == 3
    assert "knng 1 nu=2" in capsys.readouterr().err
    assert cli.main(["bounds", "--config", str(cfg), "--zeta-table", str(tmp_path / "none.txt")]) == 3


def test_default_config_valid():
    ExperimentConfig().validate()
