"""Random sensor placements on the unit square and their density integrals.

A placement pdf lives on ``Q1 = [-1/2, 1/2]^2``.  Deployments of ``n`` nodes
at density ``lam`` are obtained by scaling i.i.d. draws by ``sqrt(n / lam)``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

MAX_ABS_A = 50.0
GAUSS_ORDER = 64
NORMALIZATION_TOL = 1e-6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *stream)``.

    Substreams are derived with :class:`numpy.random.SeedSequence` spawn keys,
    so replicate ``i`` of seed ``s`` never depends on how many other
    replicates were drawn or in which order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def truncated_exp_density(a: float, z):
    """Truncated exponential density ``xi_a`` on ``[-1/2, 1/2]``.

    ``a = 0`` is the uniform limit.  Values outside the support are 0.
    Accepts scalars or arrays.
    """
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) <= 0.5
    if a == 0:
        out = np.where(inside, 1.0, 0.0)
    else:
        # a / (2 (1 - e^{-a/2})) written with expm1 so small |a| stays accurate
        norm = a / (-2.0 * np.expm1(-a / 2.0))
        out = np.where(inside, norm * np.exp(-a * np.abs(z)), 0.0)
    return out if out.ndim else float(out)


def _sample_truncated_exp(a: float, size, rng: np.random.Generator) -> np.ndarray:
    # closed-form inverse CDF of |Z| on [0, 1/2], then a random sign
    u = rng.random(size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    if a == 0:
        return sign * 0.5 * u
    t = -np.log1p(u * np.expm1(-a / 2.0)) / a
    return sign * np.clip(t, 0.0, 0.5)


@dataclass(frozen=True)
class PlacementPdf:
    """Node placement density on the unit square.

    Use the :meth:`uniform`, :meth:`truncated_exponential` and
    :meth:`tabulated` constructors rather than building this directly.
    ``table`` holds piecewise-constant cell densities on an ``m x m`` grid,
    row index along the first coordinate.
    """

    kind: str
    a: float = 0.0
    table: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def uniform(cls) -> PlacementPdf:
        return cls("uniform")

    @classmethod
    def truncated_exponential(cls, a: float) -> PlacementPdf:
        a = float(a)
        if not np.isfinite(a) or abs(a) > MAX_ABS_A:
            raise ValueError(f"truncated exponential needs |a| <= {MAX_ABS_A}, got {a}")
        if a == 0:
            return cls.uniform()
        return cls("truncated_exponential", a=a)

    @classmethod
    def tabulated(cls, grid) -> PlacementPdf:
        grid = np.array(grid, dtype=float)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1] or grid.size == 0:
            raise ValueError("tabulated pdf needs a non-empty square grid")
        if not np.all(np.isfinite(grid)) or np.any(grid <= 0):
            raise ValueError("tabulated pdf must be finite and bounded away from 0")
        mass = grid.sum() / grid.size
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"tabulated pdf integrates to {mass}, not 1")
        grid.setflags(write=False)
        return cls("tabulated", table=grid)

    @classmethod
    def from_a(cls, a: float) -> PlacementPdf:
        return cls.uniform() if a == 0 else cls.truncated_exponential(a)

    @property
    def digest(self) -> str:
        h = hashlib.sha256(self.kind.encode())
        h.update(np.float64(self.a).tobytes())
        if self.table is not None:
            h.update(self.table.tobytes())
        return h.hexdigest()[:16]

    def density(self, x) -> np.ndarray:
        """Evaluate the density at points ``x`` of shape ``(..., 2)``."""
        x = np.asarray(x, dtype=float)
        inside = np.all(np.abs(x) <= 0.5, axis=-1)
        if self.kind == "uniform":
            return np.where(inside, 1.0, 0.0)
        if self.kind == "truncated_exponential":
            return truncated_exp_density(self.a, x[..., 0]) * truncated_exp_density(self.a, x[..., 1])
        m = self.table.shape[0]
        idx = np.clip(np.floor((x + 0.5) * m).astype(int), 0, m - 1)
        return np.where(inside, self.table[idx[..., 0], idx[..., 1]], 0.0)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` i.i.d. points on Q1."""
        if self.kind == "uniform":
            return rng.random((size, 2)) - 0.5
        if self.kind == "truncated_exponential":
            return _sample_truncated_exp(self.a, (size, 2), rng)
        m = self.table.shape[0]
        probs = self.table.ravel() / self.table.sum()
        cells = rng.choice(probs.size, size=size, p=probs)
        rows, cols = np.divmod(cells, m)
        offs = rng.random((size, 2))
        return (np.stack([rows, cols], axis=1) + offs) / m - 0.5

    def check(self) -> None:
        """Raise ``ValueError`` unless the pdf integrates to 1 on Q1."""
        mass = pdf_power_integral(self, 0.0)
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"{self.kind} pdf integrates to {mass}")


def _gl_half_interval(f) -> float:
    # Gauss-Legendre on [0, 1/2]; the truncated exponential has a kink at 0
    t = 0.25 * (_GL_NODES + 1.0)
    return 0.25 * float(np.dot(_GL_WEIGHTS, f(t)))


def density_power_integral(pdf: PlacementPdf, p: float) -> float:
    """Integral of ``tau(x) ** p`` over the unit square."""
    if pdf.kind == "uniform":
        return 1.0
    if pdf.kind == "truncated_exponential":
        one_d = 2.0 * _gl_half_interval(lambda t: truncated_exp_density(pdf.a, t) ** p)
        return one_d * one_d
    return float(np.sum(pdf.table ** p) / pdf.table.size)


def pdf_power_integral(pdf: PlacementPdf, nu: float) -> float:
    """Integral of ``tau(x) ** (1 - nu/2)`` over the unit square."""
    if nu < 0:
        raise ValueError("path-loss exponent must be non-negative")
    return density_power_integral(pdf, 1.0 - nu / 2.0)


@dataclass(frozen=True)
class Deployment:
    points: np.ndarray = field(repr=False)
    n: int
    lam: float
    fusion_center: int
    seed: int
    pdf: PlacementPdf = field(default_factory=PlacementPdf.uniform)

    @property
    def side(self) -> float:
        return float(np.sqrt(self.n / self.lam))

    @property
    def digest(self) -> str:
        h = hashlib.sha256(self.points.tobytes())
        h.update(np.int64(self.fusion_center).tobytes())
        return h.hexdigest()[:16]


def sample_deployment(n: int, lam: float, pdf: PlacementPdf | None = None, seed: int = 0,
                      stream: tuple[int, ...] = ()) -> Deployment:
    """Place ``n`` nodes i.i.d. from ``pdf``, scaled to the square of area ``n / lam``.

    The fusion center is drawn uniformly among the nodes from the same stream.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if not lam > 0:
        raise ValueError(f"density must be positive, got {lam}")
    pdf = PlacementPdf.uniform() if pdf is None else pdf
    if not isinstance(pdf, PlacementPdf):
        raise ValueError(f"not a placement pdf: {pdf!r}")
    rng = make_rng(seed, *stream)
    pts = pdf.sample(n, rng) * np.sqrt(n / lam)
    fc = int(rng.integers(n))
    pts.setflags(write=False)
    return Deployment(points=pts, n=n, lam=float(lam), fusion_center=fc, seed=int(seed), pdf=pdf)


@dataclass(frozen=True)
class PoissonSample:
    points: np.ndarray = field(repr=False)
    intensity: float
    window_side: float
    includes_origin: bool

    @property
    def origin_index(self) -> int | None:
        return len(self.points) - 1 if self.includes_origin else None


def sample_poisson(intensity: float, window_side: float, include_origin: bool = False,
                   seed: int = 0, stream: tuple[int, ...] = (),
                   rng: np.random.Generator | None = None) -> PoissonSample:
    """Homogeneous Poisson points on the square window centered at the origin.

    With ``include_origin`` the origin is appended as the last point.
    """
    if not intensity > 0 or not window_side > 0:
        raise ValueError("intensity and window side must be positive")
    rng = make_rng(seed, *stream) if rng is None else rng
    count = rng.poisson(intensity * window_side ** 2)
    pts = (rng.random((count, 2)) - 0.5) * window_side
    if include_origin:
        pts = np.vstack([pts, np.zeros((1, 2))])
    return PoissonSample(pts, float(intensity), float(window_side), bool(include_origin))
