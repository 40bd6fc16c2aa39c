"""Figures rendered next to the sweep and bound CSVs."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _label(rec) -> str:
    if rec["policy"] != "DFMRF" or rec["dep_kind"] == "none":
        return rec["policy"] if rec["policy"] != "DFMRF" else "DFMRF (independent)"
    sym = "k" if rec["dep_kind"] == "knng" else "delta"
    return f"DFMRF {rec['dep_kind']} {sym}={rec['dep_param']}"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _dedupe_policy_rows(summary):
    # policies other than DFMRF ignore the dependency cell, keep one copy
    seen = set()
    for r in summary:
        if r["policy"] != "DFMRF":
            key = (r["policy"], r["n"], r["nu"], r["placement_a"])
            if key in seen:
                continue
            seen.add(key)
        yield r


def plot_summary(summary: list[dict], out_dir, name: str) -> dict[str, Path]:
    """Energy and DFMRF/MST ratio against n, plus energy against nu or delta."""
    out = Path(out_dir)
    written = {}
    rows = list(_dedupe_policy_rows(summary))
    panels = sorted({(float(r["nu"]), float(r["placement_a"])) for r in rows})

    fig, axes = plt.subplots(1, len(panels), figsize=(4.5 * len(panels), 3.6), squeeze=False)
    for ax, (nu, a) in zip(axes[0], panels):
        lines = defaultdict(list)
        for r in rows:
            if float(r["nu"]) == nu and float(r["placement_a"]) == a:
                lines[_label(r)].append((int(r["n"]), float(r["mean_average"]), float(r["se_average"])))
        for label, pts in lines.items():
            pts.sort()
            n, m, se = zip(*pts)
            ax.errorbar(n, m, yerr=[0 if s != s else s for s in se], marker="o", ms=3,
                        capsize=2, label=label)
        ax.set_xlabel("n")
        ax.set_ylabel("average energy per node")
        ax.set_title(f"nu={nu:g}, a={a:g}")
        ax.legend(fontsize=7)
    written["fig_energy_n"] = _save(fig, out / f"{name}_energy_vs_n.png")

    ratio_rows = [r for r in rows if r["policy"] == "DFMRF" and r["mean_ratio"] != "nan"]
    if ratio_rows:
        fig, ax = plt.subplots(figsize=(5, 3.6))
        lines = defaultdict(list)
        for r in ratio_rows:
            key = f"{_label(r)}, nu={float(r['nu']):g}, a={float(r['placement_a']):g}"
            lines[key].append((int(r["n"]), float(r["mean_ratio"])))
        for label, pts in lines.items():
            pts.sort()
            ax.plot(*zip(*pts), marker="o", ms=3, label=label)
        ax.set_xlabel("n")
        ax.set_ylabel("DFMRF / MST energy")
        ax.legend(fontsize=7)
        written["fig_ratio_n"] = _save(fig, out / f"{name}_ratio_vs_n.png")

    n_max = max(int(r["n"]) for r in rows)
    at_max = [r for r in rows if int(r["n"]) == n_max]
    nus = sorted({float(r["nu"]) for r in at_max})
    if len(nus) > 1:
        fig, ax = plt.subplots(figsize=(5, 3.6))
        lines = defaultdict(list)
        for r in at_max:
            lines[f"{_label(r)}, a={float(r['placement_a']):g}"].append(
                (float(r["nu"]), float(r["mean_average"])))
        for label, pts in lines.items():
            pts.sort()
            ax.plot(*zip(*pts), marker="o", ms=3, label=label)
        ax.set_yscale("log")
        ax.set_xlabel("path-loss exponent nu")
        ax.set_ylabel(f"average energy at n={n_max}")
        ax.legend(fontsize=7)
        written["fig_energy_nu"] = _save(fig, out / f"{name}_energy_vs_nu.png")

    disc = [r for r in at_max if r["policy"] == "DFMRF" and r["dep_kind"] == "disc"]
    if len({r["dep_param"] for r in disc}) > 1:
        fig, ax = plt.subplots(figsize=(5, 3.6))
        lines = defaultdict(list)
        for r in disc:
            lines[f"nu={float(r['nu']):g}, a={float(r['placement_a']):g}"].append(
                (float(r["dep_param"]), float(r["mean_average"])))
        for label, pts in lines.items():
            pts.sort()
            ax.plot(*zip(*pts), marker="o", ms=3, label=label)
        ax.set_xlabel("dependency radius delta")
        ax.set_ylabel(f"DFMRF average energy at n={n_max}")
        ax.legend(fontsize=7)
        written["fig_energy_delta"] = _save(fig, out / f"{name}_energy_vs_delta.png")
    return written


def plot_bounds(records: list[dict], out_dir, name: str) -> dict[str, Path]:
    """Measured average energies against n with the asymptotic limits as flat lines."""
    groups = defaultdict(list)
    for r in records:
        groups[(r["nu"], r["dep_kind"], r["dep_param"], r["placement_a"])].append(r)
    keys = sorted(groups)
    fig, axes = plt.subplots(1, len(keys), figsize=(4.5 * len(keys), 3.6), squeeze=False)
    for ax, key in zip(axes[0], keys):
        recs = sorted(groups[key], key=lambda r: int(r["n"]))
        n = [int(r["n"]) for r in recs]
        ax.plot(n, [float(r["measured_dfmrf"]) for r in recs], "o-", ms=3, label="DFMRF measured")
        ax.plot(n, [float(r["measured_mst"]) for r in recs], "s-", ms=3, label="MST measured")
        ax.axhline(float(recs[0]["dfmrf_upper"]), ls="--", color="C0", label="DFMRF upper limit")
        ax.axhline(float(recs[0]["mst_lower"]), ls="--", color="C1", label="MST limit")
        nu, dk, dp, a = key
        ax.set_title(f"nu={nu}, {dk} {dp}, a={a}", fontsize=9)
        ax.set_xlabel("n")
        ax.set_ylabel("average energy per node")
        ax.legend(fontsize=7)
    return {"fig_bounds": _save(fig, Path(out_dir) / f"{name}_bounds.png")}
