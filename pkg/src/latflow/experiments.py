"""Flow experiments: band membership along the flow, grid scans for
surviving perturbations, greedy separated subsets, and the
box-counting dimension estimate they feed.

Everything here compares sampled data, so the guarantees are of grid
type: a membership verdict holds at the sampled times and carries the
multiplicative inter-sample risk factor e^{step * max(1/m, 1/n)}, which
bounds how far the smallest minimum can drift between samples.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import (
    DEFAULT_ENUM_BUDGET,
    FlowShape,
    MinimaPath,
    PerturbationMatrix,
    flowed_basis,
    successive_minima,
)
from .templates import DomainMismatch, Template


@dataclass(frozen=True)
class BandSpec:
    """Target band [rho, eta] for the smallest minimum, checked on the
    sample grid t_start, t_start + grid_step, ..., <= horizon."""

    rho: float
    eta: float
    t_start: float
    horizon: float
    grid_step: float

    def __post_init__(self):
        if not (0 < self.rho <= self.eta):
            raise ValueError("need 0 < rho <= eta")
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")
        if self.t_start < 0:
            raise ValueError("t_start must be nonnegative")
        if self.grid_step > self.horizon - self.t_start:
            raise ValueError("window must cover at least one grid step")

    def times(self) -> np.ndarray:
        count = int(math.floor((self.horizon - self.t_start) / self.grid_step + 1e-12)) + 1
        return self.t_start + self.grid_step * np.arange(count)


@dataclass(frozen=True)
class BandVerdict:
    ok: bool
    witness_t: float | None
    witness_lambda1: float | None
    samples: int
    inter_sample_risk: float  # multiplicative bound on lambda_1 drift between samples

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class SeparatedSet:
    """Points pairwise >= separation apart in the torus sup metric.

    level records the scale index N the separation was derived from
    (separation = e^{-(1/m + 1/n) N}), when there is one.
    """

    shape: FlowShape | None
    level: int | None
    separation: float
    points: tuple[PerturbationMatrix, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                dist = torus_distance(pts[i], pts[j])
                if dist < self.separation:
                    raise ValueError(
                        f"points {i} and {j} are {dist} apart, below {self.separation}"
                    )
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


def torus_distance(a, b) -> float:
    """Sup distance on the torus of perturbations (entrywise distance to
    the nearest integer translate)."""
    ea = a.entries if isinstance(a, PerturbationMatrix) else np.asarray(a, dtype=float)
    eb = b.entries if isinstance(b, PerturbationMatrix) else np.asarray(b, dtype=float)
    frac = np.abs(ea - eb) % 1.0
    return float(np.max(np.minimum(frac, 1.0 - frac)))


def sup_deviation(path: MinimaPath, template: Template) -> float:
    """Sup over samples and components of |h_i(t) - f_i(t)|.

    Sampled, so between samples the true deviation can exceed this by at
    most 2 * gap * max(1/m, 1/n) (both h and f obey the same slope
    bounds).  Raises DomainMismatch if any sample time falls outside the
    template's domain.
    """
    if path.shape != template.shape:
        raise ValueError("path and template disagree on the flow shape")
    worst = 0.0
    for t, row in zip(path.times, path.logs):
        f = template.path.value(t)  # DomainMismatch propagates
        for h, fv in zip(row, f):
            worst = max(worst, abs(h - float(fv)))
    return worst


def band_membership(
    shape: FlowShape, A, band: BandSpec, *, budget: int = DEFAULT_ENUM_BUDGET
) -> BandVerdict:
    """Check rho <= lambda_1(a_t u_A Z^d) <= eta at every sampled t,
    reporting the first violation."""
    risk = math.exp(band.grid_step * max(1.0 / shape.m, 1.0 / shape.n))
    times = band.times()
    for t in times:
        lam1 = successive_minima(flowed_basis(shape, A, float(t)), 1, budget=budget)[0]
        if not (band.rho <= lam1 <= band.eta):
            return BandVerdict(False, float(t), lam1, len(times), risk)
    return BandVerdict(True, None, None, len(times), risk)


def _scan_chunk(args):
    shape, band, budget, flats = args
    keep = []
    for flat in flats:
        A = PerturbationMatrix.from_flat(shape, flat)
        if band_membership(shape, A, band, budget=budget).ok:
            keep.append(flat)
    return keep


def scan_band_matrices(
    shape: FlowShape,
    band: BandSpec,
    resolution: int,
    *,
    workers: int = 1,
    budget: int = DEFAULT_ENUM_BUDGET,
) -> list[PerturbationMatrix]:
    """Exhaustive scan of the (1/resolution)-grid on the torus, keeping
    the perturbations whose whole sampled trajectory stays in the band.

    Survivors come back in lexicographic grid order regardless of the
    worker count.  Emits a warning when nothing survives (common when
    the horizon outlives every rational grid point).
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    mn = shape.m * shape.n
    idx = np.indices((resolution,) * mn).reshape(mn, -1).T
    flats = [tuple(i / resolution for i in row) for row in idx]

    if workers <= 1:
        kept = _scan_chunk((shape, band, budget, flats))
    else:
        chunks = [
            (shape, band, budget, flats[i::workers]) for i in range(workers)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_chunk, chunks))
        kept = sorted(set().union(*map(set, parts)))
    survivors = [PerturbationMatrix.from_flat(shape, f) for f in kept]
    if not survivors:
        warnings.warn(
            f"no grid point survives the band to horizon {band.horizon}", stacklevel=2
        )
    return survivors


def greedy_separated_set(
    points, separation: float, *, level: int | None = None
) -> SeparatedSet:
    """Greedy maximal separated subset, scanning points in the given
    order and keeping those >= separation from everything kept so far.

    Pairwise separation and maximality (every rejected point is within
    separation of some kept point) are re-verified on every run; both
    are structural properties of the greedy sweep, so a failure would be
    a metric bug.
    """
    pts = list(points)
    shape = pts[0].shape if pts else None
    kept: list[PerturbationMatrix] = []
    for p in pts:
        if all(torus_distance(p, q) >= separation for q in kept):
            kept.append(p)
    kept_set = set(kept)
    for p in pts:  # maximality audit
        if p in kept_set:
            continue
        if not any(torus_distance(p, q) < separation for q in kept):
            raise AssertionError("greedy sweep left an admissible point out")
    return SeparatedSet(shape, level, separation, tuple(kept))


def dimension_estimate(count: int, N: int, shape: FlowShape) -> float:
    """Box-counting style estimate log(count) / ((1/m + 1/n) N) from the
    size of a maximal separated set at scale e^{-(1/m + 1/n) N}."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    return math.log(count) / (shape.expansion_rate() * N)


# ---------------------------------------------------------------------------
# CSV


def matrices_to_csv(points, shape: FlowShape) -> str:
    header = ",".join(f"a{i}{j}" for i in range(1, shape.m + 1) for j in range(1, shape.n + 1))
    lines = [header]
    for p in points:
        lines.append(",".join(f"{x:.12g}" for x in p.flat()))
    return "\n".join(lines) + "\n"


def matrices_from_csv(text: str, shape: FlowShape) -> list[PerturbationMatrix]:
    out = []
    mn = shape.m * shape.n
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("a11"):
            continue
        vals = [float(x) for x in line.split(",")]
        if len(vals) != mn:
            raise ValueError(f"expected {mn} entries per row, got {len(vals)}")
        out.append(PerturbationMatrix.from_flat(shape, vals))
    return out
