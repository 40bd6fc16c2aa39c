"""Configuration-driven sweeps, zeta tables and bound reports.

Config files are flat ``key = value`` text; ``#`` starts a comment and list
values are comma separated.  ``n`` also accepts ``start:stop:step``
(inclusive).
"""
from __future__ import annotations

import csv
import io
import math
import os
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .cliques import NonScalableRegimeError, maximal_cliques
from .geograph import (
    DependencyGraph,
    Router,
    build_complete,
    build_disc,
    build_disc_network,
    build_emst,
    build_gabriel,
    build_knng,
)
from .placement import PlacementPdf, sample_deployment
from .policies import POLICY_KINDS, energy, plan_dfmrf, plan_dt, plan_mst_agg, plan_sp
from .scaling import (
    append_zeta_table,
    approx_ratio,
    dfmrf_upper_disc,
    dfmrf_upper_knng,
    estimate_zeta_many,
    lookup_zeta,
    mst_limit,
    read_zeta_table,
)

THREADS_ENV = "FUSIONSCALE_THREADS"

ROW_FIELDS = ("experiment", "run", "n", "lambda", "nu", "policy", "dep_kind", "dep_param",
              "placement_a", "fg_energy", "ag_energy", "total", "average", "status")
SUMMARY_FIELDS = ("experiment", "n", "lambda", "nu", "policy", "dep_kind", "dep_param",
                  "placement_a", "runs", "mean_fg", "mean_ag", "mean_total", "mean_average",
                  "se_average", "mean_ratio", "se_ratio")
BOUND_FIELDS = ("experiment", "lambda", "nu", "u", "dep_kind", "dep_param", "placement_a",
                "mst_lower", "dfmrf_upper", "rho", "n", "measured_dfmrf", "se_dfmrf",
                "measured_mst", "se_mst", "measured_ratio", "se_ratio")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class MissingZetaError(LookupError):
    """A bound needs a zeta constant absent from the table (CLI exit code 3)."""


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


@dataclass
class ExperimentConfig:
    name: str = "sweep"
    policies: list[str] = field(default_factory=lambda: ["SP", "MST_AGG", "DFMRF"])
    dependency: list[str] = field(default_factory=lambda: ["knng"])
    k: list[int] = field(default_factory=lambda: [1])
    delta: list[float] = field(default_factory=lambda: [0.0])
    placement: list[float] = field(default_factory=lambda: [0.0])
    nu: list[float] = field(default_factory=lambda: [2.0])
    n: list[int] = field(default_factory=lambda: [10, 50, 100])
    lam: float = 1.0
    runs: int = 10
    seed: int = 0
    network: str = "complete"
    proc_mode: str = "min_cost"
    u: float = 1.0
    output: str = "results"
    plots: bool = True

    def validate(self) -> ExperimentConfig:
        for key in ("policies", "dependency", "placement", "nu", "n"):
            if not getattr(self, key):
                raise ConfigError(f"'{key}' must be a non-empty list")
        bad = [p for p in self.policies if p not in POLICY_KINDS]
        if bad:
            raise ConfigError(f"unknown policies {bad}; choose from {list(POLICY_KINDS)}")
        bad = [d for d in self.dependency if d not in ("knng", "disc", "none")]
        if bad:
            raise ConfigError(f"unknown dependency kinds {bad}")
        if "knng" in self.dependency and (not self.k or min(self.k) < 1):
            raise ConfigError("k-NNG dependency needs k values >= 1")
        if "disc" in self.dependency and (not self.delta or min(self.delta) < 0):
            raise ConfigError("disc dependency needs delta values >= 0")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if min(self.n) < 2:
            raise ConfigError("every n must be at least 2")
        if "knng" in self.dependency and max(self.k) > min(self.n) - 1:
            raise ConfigError("k must be smaller than every n")
        if min(self.nu) < 0:
            raise ConfigError("nu must be non-negative")
        if self.u < 1:
            raise ConfigError("u must be at least 1")
        if self.proc_mode not in ("min_cost", "min_index"):
            raise ConfigError(f"unknown proc_mode {self.proc_mode!r}")
        _network_spec(self.network)
        for a in self.placement:
            try:
                PlacementPdf.from_a(a)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return self

    def dep_cells(self) -> list[tuple[str, float]]:
        cells: list[tuple[str, float]] = []
        for kind in self.dependency:
            if kind == "none":
                cells.append(("none", 0))
            elif kind == "knng":
                cells.extend(("knng", int(k)) for k in self.k)
            else:
                cells.extend(("disc", float(d)) for d in self.delta)
        return cells


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_ints(value: str) -> list[int]:
    out: list[int] = []
    for part in _split(value):
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            if len(bits) != 3 or bits[2] <= 0:
                raise ConfigError(f"bad range {part!r}; use start:stop:step")
            out.extend(range(bits[0], bits[1] + 1, bits[2]))
        else:
            out.append(int(part))
    return out


def _parse_placement(value: str) -> list[float]:
    return [0.0 if v.lower() == "uniform" else float(v) for v in _split(value)]


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


_PARSERS = {
    "name": str.strip,
    "policies": lambda v: [p.upper() for p in _split(v)],
    "dependency": lambda v: [d.lower() for d in _split(v)],
    "k": _parse_ints,
    "delta": lambda v: [float(x) for x in _split(v)],
    "placement": _parse_placement,
    "nu": lambda v: [float(x) for x in _split(v)],
    "n": _parse_ints,
    "lam": float,
    "runs": int,
    "seed": int,
    "network": str.strip,
    "proc_mode": str.strip,
    "u": float,
    "output": str.strip,
    "plots": _parse_bool,
}
_ALIASES = {"lambda": "lam", "proc-mode": "proc_mode", "out": "output"}


def apply_overrides(cfg: ExperimentConfig, values: dict[str, str]) -> ExperimentConfig:
    updates = {}
    for raw_key, raw in values.items():
        key = _ALIASES.get(raw_key, raw_key).replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {raw_key!r}")
        try:
            updates[key] = _PARSERS[key](raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {raw_key}: {raw!r}") from exc
    return replace(cfg, **updates)


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return apply_overrides(ExperimentConfig(), values).validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _network_spec(spec: str) -> tuple[str, float]:
    if spec in ("complete", "gabriel"):
        return spec, math.inf
    if spec.startswith("disc:"):
        try:
            r = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad network spec {spec!r}") from None
        if r <= 0:
            raise ConfigError("network disc radius must be positive")
        return "disc", r
    raise ConfigError(f"unknown network {spec!r}; use complete, gabriel or disc:R")


def _build_network(points, spec: str):
    kind, r = _network_spec(spec)
    if kind == "complete":
        return build_complete(points)
    if kind == "gabriel":
        return build_gabriel(points)
    return build_disc_network(points, r)


def _dep_graph(points, kind: str, param) -> DependencyGraph:
    if kind == "knng":
        return build_knng(points, int(param))
    if kind == "disc":
        return build_disc(points, float(param))
    return DependencyGraph.empty(len(points))


def _placement_key(a: float) -> int:
    return zlib.crc32(fmt(a).encode())


def _task(args):
    """All rows for one deployment: every nu, dependency cell and policy."""
    cfg, n, ai, run = args
    a = cfg.placement[ai]
    pdf = PlacementPdf.from_a(a)
    dep = sample_deployment(n, cfg.lam, pdf, cfg.seed, (n, run, _placement_key(a)))
    tree = build_emst(dep.points)
    rows = []
    try:
        net = _build_network(dep.points, cfg.network)
    except ValueError:
        net = None
    cells = cfg.dep_cells()
    graphs: dict[int, tuple] = {}
    if "DFMRF" in cfg.policies:
        for ci, (dkind, dparam) in enumerate(cells):
            dg = _dep_graph(dep.points, dkind, dparam)
            try:
                graphs[ci] = (dg, maximal_cliques(dg))
            except NonScalableRegimeError:
                graphs[ci] = (dg, None)
    for vi, nu in enumerate(cfg.nu):
        router = Router(net, nu) if net is not None else None
        shared = {}
        for ci, (dkind, dparam) in enumerate(cells):
            for pi, policy in enumerate(cfg.policies):
                status = "ok"
                rep = None
                if net is None and policy in ("SP", "DFMRF"):
                    status = "network_error"
                elif policy == "DFMRF":
                    dg, cq = graphs[ci]
                    if cq is None:
                        status = "clique_cap"
                    else:
                        rep = energy(plan_dfmrf(dep, dg, net, nu, cfg.proc_mode, tree=tree,
                                                router=router, cliques=cq), nu)
                else:
                    if policy not in shared:
                        if policy == "DT":
                            plan = plan_dt(dep)
                        elif policy == "SP":
                            plan = plan_sp(dep, net, nu, router=router)
                        else:
                            plan = plan_mst_agg(dep, tree)
                        shared[policy] = energy(plan, nu)
                    rep = shared[policy]
                if rep is None:
                    vals = (math.nan,) * 4
                else:
                    vals = (rep.per_phase["forwarding"], rep.per_phase["aggregation"],
                            rep.total, rep.average)
                row = (cfg.name, run, n, cfg.lam, nu, policy, dkind, dparam, a, *vals, status)
                rows.append(((vi, ci, run, pi), row))
    return rows


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        w = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return (os.cpu_count() or 1) if w <= 0 else w


def simulate_rows(cfg: ExperimentConfig) -> list[tuple]:
    """Raw result rows in config order, independent of worker scheduling."""
    cfg.validate()
    tasks = [(cfg, n, ai, run) for n in cfg.n for ai in range(len(cfg.placement))
             for run in range(cfg.runs)]
    workers = min(_workers(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_task(t) for t in tasks]
    keyed = []
    for (_, n, ai, _), rows in zip(tasks, results):
        ni = cfg.n.index(n)
        keyed.extend(((ni, ai, *k), row) for k, row in rows)
    keyed.sort(key=lambda kr: kr[0])
    return [row for _, row in keyed]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_FIELDS)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _mean_se(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    m = math.fsum(values) / len(values)
    if len(values) < 2:
        return m, math.nan
    var = math.fsum((v - m) ** 2 for v in values) / (len(values) - 1)
    return m, math.sqrt(var / len(values))


def summarize(rows: list[dict]) -> list[dict]:
    """Per-cell means and standard errors from raw rows as written to CSV.

    ``mean_ratio`` pairs each DFMRF (or other) run with the MST_AGG run on the
    same deployment and averages ``total / mst_total``.
    """
    cell_key = ("experiment", "n", "lambda", "nu", "policy", "dep_kind", "dep_param", "placement_a")
    cells: dict[tuple, list[dict]] = defaultdict(list)
    mst_total: dict[tuple, float] = {}
    for r in rows:
        cells[tuple(r[k] for k in cell_key)].append(r)
        if r["policy"] == "MST_AGG" and r["status"] == "ok":
            mst_total[(r["n"], r["nu"], r["dep_kind"], r["dep_param"], r["placement_a"],
                       r["run"])] = float(r["total"])
    out = []
    for key, group in cells.items():
        ok = [r for r in group if r["status"] == "ok"]
        mean_fg = _mean_se([float(r["fg_energy"]) for r in ok])[0]
        mean_ag = _mean_se([float(r["ag_energy"]) for r in ok])[0]
        mean_total = _mean_se([float(r["total"]) for r in ok])[0]
        mean_avg, se_avg = _mean_se([float(r["average"]) for r in ok])
        ratios = []
        for r in ok:
            m = mst_total.get((r["n"], r["nu"], r["dep_kind"], r["dep_param"], r["placement_a"],
                               r["run"]))
            if m:
                ratios.append(float(r["total"]) / m)
        mean_ratio, se_ratio = _mean_se(ratios)
        rec = dict(zip(cell_key, key))
        rec.update(runs=str(len(ok)), mean_fg=fmt(mean_fg), mean_ag=fmt(mean_ag),
                   mean_total=fmt(mean_total), mean_average=fmt(mean_avg), se_average=fmt(se_avg),
                   mean_ratio=fmt(mean_ratio), se_ratio=fmt(se_ratio))
        out.append(rec)
    return out


def _write_dicts(path, header, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        w.writerows(records)


def run_sweep(cfg: ExperimentConfig, out_dir=None, plots: bool | None = None) -> dict[str, Path]:
    """Run a sweep and write ``<name>_runs.csv`` and ``<name>_summary.csv``.

    Returns the written paths keyed by ``runs``, ``summary`` and any figures.
    """
    out = Path(out_dir if out_dir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = simulate_rows(cfg)
    runs_path = out / f"{cfg.name}_runs.csv"
    runs_path.write_text(rows_to_csv(rows), encoding="utf-8")
    summary = summarize(read_rows(runs_path))
    summary_path = out / f"{cfg.name}_summary.csv"
    _write_dicts(summary_path, SUMMARY_FIELDS, summary)
    written = {"runs": runs_path, "summary": summary_path}
    if cfg.plots if plots is None else plots:
        from .plotting import plot_summary
        written.update(plot_summary(summary, out, cfg.name))
    return written


def run_zeta(kind: str, nus, replicates: int, seed: int = 0, param: float = 0.0,
             intensity: float = 1.0, window_side: float = 50.0, table=None):
    """Estimate zeta constants and append them to ``table`` when given."""
    ests = estimate_zeta_many(kind, nus, intensity, window_side, replicates, seed, param)
    if table is not None:
        append_zeta_table(table, ests)
    return ests


def _need(table, kind, nu, param=0.0):
    z = lookup_zeta(table, kind, nu, param)
    if z is None:
        label = kind if kind == "mst" else f"{kind} {fmt(param)}"
        raise MissingZetaError(f"zeta table has no entry for {label} nu={fmt(nu)} at intensity 1")
    return z


def compute_bounds(cfg: ExperimentConfig, table) -> list[dict]:
    """Asymptotic bounds per (nu, dependency cell, placement), without measurements."""
    out = []
    for nu in cfg.nu:
        for dkind, dparam in cfg.dep_cells():
            for a in cfg.placement:
                pdf = PlacementPdf.from_a(a)
                zm = _need(table, "mst", nu)
                lower = mst_limit(cfg.lam, nu, pdf, zm)
                if dkind == "knng":
                    zk = _need(table, "knng", nu, dparam)
                    upper = dfmrf_upper_knng(cfg.lam, nu, cfg.u, int(dparam), pdf, zm, zk)
                elif dkind == "disc":
                    upper = dfmrf_upper_disc(cfg.lam, nu, cfg.u, float(dparam), pdf, zm)
                else:
                    upper = dfmrf_upper_knng(cfg.lam, nu, cfg.u, 0, pdf, zm)
                rho = approx_ratio(lower, upper)
                out.append({"experiment": cfg.name, "lambda": fmt(cfg.lam), "nu": fmt(nu),
                            "u": fmt(cfg.u), "dep_kind": dkind, "dep_param": fmt(dparam),
                            "placement_a": fmt(a), "mst_lower": fmt(lower.value),
                            "dfmrf_upper": fmt(upper.value), "rho": fmt(rho.value)})
    return out


def run_bounds(cfg: ExperimentConfig, zeta_table, out_dir=None, plots: bool | None = None,
               summary=None) -> dict[str, Path]:
    """Write ``<name>_bounds.csv``: limits next to finite-n measured means.

    Measurements come from ``summary`` (a path to a summary CSV) or from a
    fresh sweep of ``cfg`` with DFMRF and MST_AGG forced on.
    """
    table = read_zeta_table(zeta_table) if isinstance(zeta_table, (str, os.PathLike)) else zeta_table
    bounds = compute_bounds(cfg, table)
    out = Path(out_dir if out_dir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if summary is None:
        sweep_cfg = replace(cfg, policies=["MST_AGG", "DFMRF"])
        written.update(run_sweep(sweep_cfg, out, plots=False))
        summary_rows = read_rows(written["summary"])
    else:
        summary_rows = read_rows(summary)
    index = {(r["policy"], r["n"], r["nu"], r["dep_kind"], r["dep_param"], r["placement_a"]): r
             for r in summary_rows}
    records = []
    for b in bounds:
        for n in cfg.n:
            key = (fmt(n), b["nu"], b["dep_kind"], b["dep_param"], b["placement_a"])
            d = index.get(("DFMRF", *key), {})
            m = index.get(("MST_AGG", *key), {})
            rec = dict(b, n=fmt(n), measured_dfmrf=d.get("mean_average", "nan"),
                       se_dfmrf=d.get("se_average", "nan"),
                       measured_mst=m.get("mean_average", "nan"), se_mst=m.get("se_average", "nan"),
                       measured_ratio=d.get("mean_ratio", "nan"), se_ratio=d.get("se_ratio", "nan"))
            records.append(rec)
    path = out / f"{cfg.name}_bounds.csv"
    _write_dicts(path, BOUND_FIELDS, records)
    written["bounds"] = path
    if cfg.plots if plots is None else plots:
        from .plotting import plot_bounds
        written.update(plot_bounds(records, out, cfg.name))
    return written


def config_keys() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
