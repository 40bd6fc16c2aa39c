"""Scaling constants and asymptotic energy bounds.

``zeta(nu; G)`` is half the expected sum of ``|e|^nu`` over the edges at the
origin of graph ``G`` built on a unit-intensity Poisson process plus the
origin.  It is estimated here by Monte Carlo on a finite window.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .geograph import build_disc, build_emst, build_knng
from .placement import (
    PlacementPdf,
    density_power_integral,
    make_rng,
    pdf_power_integral,
    sample_poisson,
)

ZETA_KINDS = ("mst", "knng", "disc")
DEFAULT_WINDOW = 50.0
MIN_WINDOW = 20.0
TABLE_HEADER = "# fusionscale zeta-table v1: kind param nu intensity mean stderr replicates seed"


@dataclass(frozen=True)
class ZetaEstimate:
    graph_kind: str
    param: float
    nu: float
    intensity: float
    mean: float
    std_error: float
    replicates: int
    window_side: float = DEFAULT_WINDOW
    seed: int = 0
    resampled: int = 0


class _Running:
    """Welford mean/variance accumulator, one slot per exponent."""

    def __init__(self, size: int):
        self.count = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def push(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def stderr(self) -> np.ndarray:
        if self.count < 2:
            return np.full_like(self.mean, np.nan)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


def _graph_edges(kind: str, points: np.ndarray, param: float) -> np.ndarray:
    if kind == "mst":
        return build_emst(points).edges
    if kind == "knng":
        return build_knng(points, int(param)).edges
    if kind == "disc":
        return build_disc(points, param).edges
    raise ValueError(f"unknown graph kind {kind!r}")


def origin_edge_lengths(kind: str, points: np.ndarray, origin: int, param: float = 0.0) -> np.ndarray:
    """Lengths of the graph edges incident to node ``origin``."""
    edges = _graph_edges(kind, points, param)
    at = (edges[:, 0] == origin) | (edges[:, 1] == origin)
    other = np.where(edges[at, 0] == origin, edges[at, 1], edges[at, 0])
    return np.hypot(*(points[other] - points[origin]).T)


def zeta_sample(seed: int, replicate: int, intensity: float, window_side: float):
    """The Poisson-plus-origin sample behind one estimator replicate.

    Returns ``(points, resamples)``; empty draws are redrawn from the same
    substream and counted.
    """
    rng = make_rng(seed, replicate)
    resamples = 0
    while True:
        s = sample_poisson(intensity, window_side, include_origin=True, rng=rng)
        if len(s.points) > 1:
            return s.points, resamples
        resamples += 1


def _check_kind(kind: str, param: float) -> None:
    if kind not in ZETA_KINDS:
        raise ValueError(f"unknown graph kind {kind!r}")
    if kind == "knng" and (int(param) != param or param < 1):
        raise ValueError("k-NNG needs an integer k >= 1")
    if kind == "disc" and param < 0:
        raise ValueError("disc radius must be non-negative")


def estimate_zeta_many(kind: str, nus, intensity: float = 1.0,
                       window_side: float = DEFAULT_WINDOW, replicates: int = 1000,
                       seed: int = 0, param: float = 0.0) -> list[ZetaEstimate]:
    """Estimate ``zeta(nu; kind)`` for several exponents from shared samples."""
    _check_kind(kind, param)
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    if np.any(nus < 0):
        raise ValueError("path-loss exponent must be non-negative")
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    if window_side < MIN_WINDOW:
        raise ValueError(f"window side must be at least {MIN_WINDOW}")
    if replicates < 1:
        raise ValueError("need at least one replicate")
    acc = _Running(len(nus))
    resampled = 0
    for r in range(replicates):
        pts, extra = zeta_sample(seed, r, intensity, window_side)
        resampled += extra
        lengths = origin_edge_lengths(kind, pts, len(pts) - 1, param)
        acc.push(0.5 * np.array([np.sum(lengths ** nu) for nu in nus]))
    se = acc.stderr()
    return [ZetaEstimate(kind, float(param), float(nu), float(intensity), float(m), float(s),
                         replicates, float(window_side), int(seed), resampled)
            for nu, m, s in zip(nus, acc.mean, se)]


def estimate_zeta(kind: str, nu: float, intensity: float = 1.0,
                  window_side: float = DEFAULT_WINDOW, replicates: int = 1000,
                  seed: int = 0, param: float = 0.0) -> ZetaEstimate:
    """Monte-Carlo estimate of ``zeta(nu; kind)`` at the given intensity.

    ``param`` is k for ``knng`` and the radius for ``disc``.
    """
    return estimate_zeta_many(kind, [nu], intensity, window_side, replicates, seed, param)[0]


def _zeta_value(z) -> float:
    return float(z.mean if isinstance(z, ZetaEstimate) else z)


@dataclass(frozen=True)
class LimitBound:
    kind: str
    value: float
    lam: float
    nu: float
    u: float = 1.0
    pdf_digest: str = ""
    zetas: dict = field(default_factory=dict)


def mst_limit(lam: float, nu: float, pdf: PlacementPdf, zeta_mst) -> LimitBound:
    """Asymptotic average MST energy, the lower bound for every lossless policy."""
    if not lam > 0:
        raise ValueError("density must be positive")
    z = _zeta_value(zeta_mst)
    value = lam ** (-nu / 2) * z * pdf_power_integral(pdf, nu)
    return LimitBound("mst_lower", value, float(lam), float(nu), 1.0, pdf.digest, {"mst": z})


def dfmrf_upper_knng(lam: float, nu: float, u: float, k: int, pdf: PlacementPdf,
                     zeta_mst, zeta_knng=0.0) -> LimitBound:
    """Asymptotic DFMRF upper bound for k-NNG dependency; ``k = 0`` is the independent case."""
    if u < 1:
        raise ValueError("energy stretch factor must be at least 1")
    zm = _zeta_value(zeta_mst)
    zk = 0.0 if k == 0 else _zeta_value(zeta_knng)
    value = lam ** (-nu / 2) * (u * zk + zm) * pdf_power_integral(pdf, nu)
    return LimitBound("dfmrf_upper_knng", value, float(lam), float(nu), float(u), pdf.digest,
                      {"mst": zm, f"knng{k}": zk})


def disc_origin_expectation(intensity: float, nu: float, delta: float) -> float:
    """``E[sum |0,j|^nu]`` over Poisson points within ``delta`` of the origin."""
    return 2.0 * math.pi * intensity * delta ** (nu + 2) / (nu + 2)


def _disc_term_closed(lam, nu, u, delta, pdf: PlacementPdf) -> float:
    # E(lam tau(x)) is linear in tau(x), so the integrand is a multiple of tau^2
    return 0.5 * u * disc_origin_expectation(lam, nu, delta) * density_power_integral(pdf, 2.0)


def disc_term_monte_carlo(lam: float, nu: float, u: float, delta: float, pdf: PlacementPdf,
                          replicates: int, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo value of the disc forwarding term and its standard error.

    Each replicate draws a location ``x`` from ``pdf``, drops a Poisson
    process of intensity ``lam * tau(x)`` around the origin, builds the disc
    graph with the origin added and sums the origin's power-weighted edges.
    """
    if delta == 0:
        return 0.0, 0.0
    acc = _Running(1)
    for r in range(replicates):
        rng = make_rng(seed, r)
        x = pdf.sample(1, rng)
        local = lam * float(pdf.density(x)[0])
        s = sample_poisson(local, 2.0 * delta * 1.01, include_origin=True, rng=rng)
        lengths = origin_edge_lengths("disc", s.points, len(s.points) - 1, delta)
        acc.push(np.array([0.5 * u * np.sum(lengths ** nu)]))
    return float(acc.mean[0]), float(acc.stderr()[0])


def dfmrf_upper_disc(lam: float, nu: float, u: float, delta: float, pdf: PlacementPdf,
                     zeta_mst, evaluator: str = "closed", replicates: int = 10000,
                     seed: int = 0) -> LimitBound:
    """Asymptotic DFMRF upper bound for disc dependency of radius ``delta``."""
    if u < 1:
        raise ValueError("energy stretch factor must be at least 1")
    if delta < 0:
        raise ValueError("disc radius must be non-negative")
    if evaluator == "closed":
        term = _disc_term_closed(lam, nu, u, delta, pdf)
    elif evaluator == "monte_carlo":
        term = disc_term_monte_carlo(lam, nu, u, delta, pdf, replicates, seed)[0]
    else:
        raise ValueError(f"unknown evaluator {evaluator!r}")
    lower = mst_limit(lam, nu, pdf, zeta_mst)
    return LimitBound("dfmrf_upper_disc", term + lower.value, float(lam), float(nu), float(u),
                      pdf.digest, {"mst": lower.zetas["mst"], "disc_term": term})


def approx_ratio(lower: LimitBound, upper: LimitBound) -> LimitBound:
    """Asymptotic approximation ratio ``upper / lower``."""
    if lower.kind != "mst_lower":
        raise ValueError("lower bound must be an MST limit")
    if (not math.isclose(lower.lam, upper.lam) or not math.isclose(lower.nu, upper.nu)
            or lower.pdf_digest != upper.pdf_digest):
        raise ValueError("bounds were computed for different (lambda, nu, pdf)")
    value = upper.value / lower.value
    return LimitBound("approx_ratio", value, lower.lam, lower.nu, upper.u, lower.pdf_digest,
                      {**lower.zetas, **upper.zetas})


# ---- zeta table -------------------------------------------------------------

def format_zeta(z: ZetaEstimate) -> str:
    param = int(z.param) if z.graph_kind == "knng" else z.param
    return (f"{z.graph_kind} {param:.9g} {z.nu:.9g} {z.intensity:.9g} {z.mean:.9g} "
            f"{z.std_error:.9g} {z.replicates} {z.seed}")


def append_zeta_table(path, estimates) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if new:
            fh.write(TABLE_HEADER + "\n")
        for z in estimates:
            fh.write(format_zeta(z) + "\n")


def read_zeta_table(path) -> list[ZetaEstimate]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
            kind, param, nu, inten, mean, se, reps, seed = parts
            out.append(ZetaEstimate(kind, float(param), float(nu), float(inten), float(mean),
                                    float(se), int(reps), DEFAULT_WINDOW, int(seed)))
    return out


def lookup_zeta(table, kind: str, nu: float, param: float = 0.0,
                intensity: float = 1.0) -> ZetaEstimate | None:
    """Best matching entry (most replicates, then latest) or ``None``."""
    hits = [z for z in table if z.graph_kind == kind and math.isclose(z.nu, nu)
            and math.isclose(z.param, param) and math.isclose(z.intensity, intensity)]
    if not hits:
        return None
    best = max(range(len(hits)), key=lambda i: (hits[i].replicates, i))
    return hits[best]
