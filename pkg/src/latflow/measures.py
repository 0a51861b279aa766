"""Empirical measures on flowed lattices, partition entropies, and the
separation and inequality checks behind the dimension bound.

Time averages and orbit labels all walk the same iterated time-1 flow
chain, so a pushforward of a chain-built measure reproduces the next
chain entries bit for bit.  That makes atom identity (exact basis
bytes) a sound key for total-variation arithmetic, and makes the label
stream of the k-th pushforward atom a literal slice of the source
atom's stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .experiments import BandSpec, SeparatedSet
from .lattice import (
    DEFAULT_ENUM_BUDGET,
    FlowShape,
    LatticeBasis,
    _lll_transform,
    flow_matrix,
    successive_minima,
    unipotent,
)

MASS_TOL = 1e-12


class EmptySet(ValueError):
    """A measure or separated set was required to be nonempty."""


class InvalidParams(ValueError):
    """Separation parameters violate the r-inequality they must satisfy."""


class OutOfRange(ValueError):
    """A scalar argument fell outside its admissible interval."""


class EmpiricalMeasure:
    """Finitely supported probability measure on lattices.

    Atoms are (basis, weight) pairs with multiset semantics: repeats are
    kept as they come, nothing is merged.  Weights are positive and sum
    to 1 within MASS_TOL.
    """

    __slots__ = ("atoms",)

    def __init__(self, atoms):
        pairs = []
        for basis, weight in atoms:
            w = float(weight)
            if not isinstance(basis, LatticeBasis):
                raise TypeError("atoms must pair a LatticeBasis with a weight")
            if not (w > 0):
                raise ValueError(f"atom weight must be positive, got {w}")
            pairs.append((basis, w))
        if not pairs:
            raise EmptySet("a probability measure needs at least one atom")
        total = math.fsum(w for _, w in pairs)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {total}, not 1")
        object.__setattr__(self, "atoms", tuple(pairs))

    def __setattr__(self, name, value):
        raise AttributeError("EmpiricalMeasure is immutable")

    @property
    def total(self) -> float:
        return math.fsum(w for _, w in self.atoms)

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)


def _atom_key(basis: LatticeBasis):
    return basis.columns.tobytes()


def tv_distance(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """Total-variation norm of a - b as a signed measure, counting both
    tails: sum over atoms of |a{x} - b{x}|.  Atoms are identified by
    exact basis bytes, which is the right notion for chain-built
    measures and deliberately strict for everything else."""
    acc: dict[bytes, float] = {}
    for basis, w in a.atoms:
        k = _atom_key(basis)
        acc[k] = acc.get(k, 0.0) + w
    for basis, w in b.atoms:
        k = _atom_key(basis)
        acc[k] = acc.get(k, 0.0) - w
    return math.fsum(abs(v) for v in acc.values())


def pushforward(shape: FlowShape, mu: EmpiricalMeasure, steps: int = 1) -> EmpiricalMeasure:
    """Apply the time-1 flow map `steps` times to every atom."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    F = flow_matrix(shape, 1.0)
    atoms = []
    for basis, w in mu.atoms:
        cols = basis.columns
        for _ in range(steps):
            cols = F @ cols
        atoms.append((LatticeBasis(shape, cols), w))
    return EmpiricalMeasure(atoms)


def nu_N(shape: FlowShape, S: SeparatedSet) -> EmpiricalMeasure:
    """Uniform measure on the lattices of the separated set's points."""
    if len(S) == 0:
        raise EmptySet("separated set has no points")
    w = 1.0 / len(S)
    return EmpiricalMeasure((unipotent(A), w) for A in S.points)


def mu_N(shape: FlowShape, nu: EmpiricalMeasure, N: int) -> EmpiricalMeasure:
    """Time average over the first N flow steps: each source atom
    contributes its whole forward chain x, ax, ..., a^{N-1}x, each copy
    carrying 1/N of the original weight."""
    if N < 1:
        raise ValueError("N must be >= 1")
    F = flow_matrix(shape, 1.0)
    chains = [basis.columns for basis, _ in nu.atoms]
    weights = [w / N for _, w in nu.atoms]
    atoms = []
    for _ in range(N):
        for i, cols in enumerate(chains):
            atoms.append((LatticeBasis(shape, cols), weights[i]))
            chains[i] = F @ cols
    return EmpiricalMeasure(atoms)


def mass_outside_band(
    mu: EmpiricalMeasure, band: BandSpec, *, budget: int = DEFAULT_ENUM_BUDGET
) -> float:
    """Total weight of atoms whose smallest minimum leaves [rho, eta]."""
    out = 0.0
    for basis, w in mu.atoms:
        lam1 = successive_minima(basis, 1, budget=budget)[0]
        if not (band.rho <= lam1 <= band.eta):
            out += w
    return out


# ---------------------------------------------------------------------------
# Partitions


class PartitionLabeler:
    """Total label function on lattice bases, defining a finite
    partition.  The infinity label marks the unbounded end of the space
    (vanishing first minimum).  alphabet_size, when declared, is the
    partition size used in entropy corrections and must dominate the
    number of labels the function can emit; when absent, corrections
    fall back to the number of labels actually observed."""

    def __init__(self, label_fn, infinity_label="P_INF", alphabet_size: int | None = None):
        if alphabet_size is not None and alphabet_size < 1:
            raise ValueError("alphabet_size must be >= 1")
        self.label_fn = label_fn
        self.infinity_label = infinity_label
        self.alphabet_size = alphabet_size

    def label(self, basis: LatticeBasis):
        return self.label_fn(basis)


class GridLabeler(PartitionLabeler):
    """Concrete band-compatible partition: bases with first minimum
    below `floor` get the infinity label; everything else is labeled by
    its reduced basis, sign-normalized columnwise and quantized to a
    cell grid.  Lattices closer than the cell width land together, so
    cells are genuine neighborhoods and the partition is finite on any
    compact part.
    """

    def __init__(
        self,
        shape: FlowShape,
        cell: float,
        floor: float,
        *,
        alphabet_size: int | None = None,
        budget: int = DEFAULT_ENUM_BUDGET,
    ):
        if cell <= 0:
            raise ValueError("cell must be positive")
        if floor <= 0:
            raise ValueError("floor must be positive")
        self.shape = shape
        self.cell = float(cell)
        self.floor = float(floor)
        self.budget = budget
        super().__init__(self._label, "P_INF", alphabet_size)

    @classmethod
    def for_band(cls, shape: FlowShape, band: BandSpec, cell: float, **kwargs) -> "GridLabeler":
        """Labeler whose infinity cell cannot swallow band points: the
        floor sits exactly at the band's lower edge."""
        return cls(shape, cell, floor=band.rho, **kwargs)

    def _reduced(self, basis: LatticeBasis) -> np.ndarray:
        U = _lll_transform(basis.columns).astype(float)
        R = basis.columns @ U
        for j in range(R.shape[1]):
            col = R[:, j]
            lead = int(np.argmax(np.abs(col)))
            if col[lead] < 0:
                R[:, j] = -col
        return R

    def _label(self, basis: LatticeBasis):
        lam1 = successive_minima(basis, 1, budget=self.budget)[0]
        if lam1 < self.floor:
            return self.infinity_label
        R = self._reduced(basis)
        q = np.floor(R / self.cell).astype(int)
        return tuple(int(x) for x in q.T.ravel())

    def boundary_mass(self, mu: EmpiricalMeasure, shell: float) -> float:
        """Weight sitting within `shell` of a label boundary: a reduced
        coordinate within shell of a cell wall, or a first minimum
        within shell of the floor.  The partition has no null-boundary
        guarantee; this reports how much mass is at risk instead."""
        if shell < 0:
            raise ValueError("shell must be nonnegative")
        risky = 0.0
        for basis, w in mu.atoms:
            lam1 = successive_minima(basis, 1, budget=self.budget)[0]
            if abs(lam1 - self.floor) <= shell:
                risky += w
                continue
            if lam1 < self.floor:
                continue
            scaled = self._reduced(basis) / self.cell
            frac = np.abs(scaled - np.round(scaled))
            if float(frac.min()) * self.cell <= shell:
                risky += w
        return risky


def orbit_labels(shape: FlowShape, labeler: PartitionLabeler, basis: LatticeBasis, steps: int) -> list:
    """Labels of basis, a(basis), ..., a^{steps-1}(basis) along the
    iterated time-1 chain."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    F = flow_matrix(shape, 1.0)
    cols = basis.columns
    out = []
    for k in range(steps):
        out.append(labeler.label(LatticeBasis(shape, cols)))
        if k + 1 < steps:
            cols = F @ cols
    return out


# ---------------------------------------------------------------------------
# Entropy


def _shannon(weights) -> float:
    h = -math.fsum(w * math.log(w) for w in weights if w > 0)
    return h if h != 0 else 0.0


def entropy(mu: EmpiricalMeasure, labeler: PartitionLabeler) -> float:
    """Shannon entropy (natural log) of the label distribution."""
    dist: dict = {}
    for basis, w in mu.atoms:
        lab = labeler.label(basis)
        dist[lab] = dist.get(lab, 0.0) + w
    return _shannon(dist.values())


def refined_entropy(
    shape: FlowShape, nu: EmpiricalMeasure, labeler: PartitionLabeler, q: int
) -> float:
    """Entropy of the q-step joint label under nu: the partition
    refined along the first q flow steps."""
    if q < 1:
        raise ValueError("q must be >= 1")
    dist: dict = {}
    for basis, w in nu.atoms:
        key = tuple(orbit_labels(shape, labeler, basis, q))
        dist[key] = dist.get(key, 0.0) + w
    return _shannon(dist.values())


@dataclass(frozen=True)
class EntropyReport:
    """Both sides of the averaged-refinement entropy inequality

        (1/q) H_{time-avg}(q-joint) >= (1/N) H_nu(N-joint) - 2q log|P| / N

    together with the ingredients.  slack = lhs - rhs; the inequality
    holds for arbitrary label streams, so slack below -1e-9 means a
    bug in the bookkeeping, not an interesting measurement."""

    N: int
    q: int
    lhs: float
    rhs: float
    slack: float
    h_time_avg_q: float
    h_nu_N: float
    correction: float
    alphabet_size: int

    @property
    def ok(self) -> bool:
        return self.slack >= -1e-9


def entropy_inequality_check(
    shape: FlowShape, nu: EmpiricalMeasure, N: int, q: int, labeler: PartitionLabeler
) -> EntropyReport:
    """Evaluate the subadditivity chain on concrete data.

    Every atom contributes one coherent label stream of length N+q-1;
    the N-joint under nu reads the first N symbols, and the q-joint
    under the N-step time average reads each length-q window with 1/N
    of the atom's weight.  Slicing one stream per atom is what makes
    the two sides comparable."""
    if not (1 <= q <= N):
        raise ValueError("need 1 <= q <= N")
    streams = []
    for basis, w in nu.atoms:
        streams.append((orbit_labels(shape, labeler, basis, N + q - 1), w))

    nu_dist: dict = {}
    for s, w in streams:
        key = tuple(s[:N])
        nu_dist[key] = nu_dist.get(key, 0.0) + w
    h_nu = _shannon(nu_dist.values())

    avg_dist: dict = {}
    for s, w in streams:
        for k in range(N):
            key = tuple(s[k : k + q])
            avg_dist[key] = avg_dist.get(key, 0.0) + w / N
    h_avg = _shannon(avg_dist.values())

    if labeler.alphabet_size is not None:
        alphabet = labeler.alphabet_size
    else:
        alphabet = len({lab for s, _ in streams for lab in s})
    correction = 2.0 * q * math.log(alphabet) / N

    lhs = h_avg / q
    rhs = h_nu / N - correction
    return EntropyReport(
        N=N,
        q=q,
        lhs=lhs,
        rhs=rhs,
        slack=lhs - rhs,
        h_time_avg_q=h_avg,
        h_nu_N=h_nu,
        correction=correction,
        alphabet_size=alphabet,
    )


# ---------------------------------------------------------------------------
# Separation


@dataclass(frozen=True)
class SeparationParams:
    """Scales for the no-collision check: r is the working radius, r0
    the scale below which the group metric and the matrix norm are
    comparable (with constant C0 >= 1), r1 the injectivity radius proxy
    for the part of the space off the infinity cell.  r0, C0, r1 are
    taken on trust; none of them is computed."""

    r: float
    r0: float
    C0: float
    r1: float

    def __post_init__(self):
        if self.r <= 0 or self.r0 <= 0 or self.r1 <= 0:
            raise ValueError("radii must be positive")
        if self.C0 < 1:
            raise ValueError("C0 must be >= 1")

    def bound(self, shape: FlowShape) -> float:
        return min(self.r0, self.r1, math.exp(-shape.expansion_rate()) / self.C0)


@dataclass(frozen=True)
class SeparationReport:
    collision_groups: tuple[tuple[int, ...], ...]  # indices into S.points sharing a joint label
    distinct_labels: int
    points: int
    N: int

    @property
    def ok(self) -> bool:
        return not self.collision_groups


def separation_check(
    shape: FlowShape,
    S: SeparatedSet,
    params: SeparationParams,
    labeler: PartitionLabeler,
    N: int,
) -> SeparationReport:
    """Joint N-step labels of the set's lattices must be pairwise
    distinct: one-step expansion stretches the separation by
    e^{1/m + 1/n} per step, so under compliant parameters two points
    sharing every label would contradict the cell diameter.  Any
    collision reported here under valid parameters is a bug signal,
    not an expected outcome.  The labeler's cells are trusted to have
    diameter below r away from the infinity label."""
    if N < 1:
        raise ValueError("N must be >= 1")
    bound = params.bound(shape)
    if not (params.r < bound):
        raise InvalidParams(f"need r < min(r0, r1, e^(-1/m-1/n)/C0) = {bound}, got r = {params.r}")
    joint: dict[tuple, list[int]] = {}
    for idx, A in enumerate(S.points):
        key = tuple(orbit_labels(shape, labeler, unipotent(A), N))
        joint.setdefault(key, []).append(idx)
    groups = tuple(tuple(g) for g in joint.values() if len(g) > 1)
    return SeparationReport(
        collision_groups=groups, distinct_labels=len(joint), points=len(S.points), N=N
    )


# ---------------------------------------------------------------------------
# Mixture ledger


def haar_entropy(shape: FlowShape) -> float:
    """Flow entropy of the uniform measure on the whole space, taken as
    a ledger constant equal to the dimension d = m + n."""
    return float(shape.d)


def mixture_weights(h: float, shape: FlowShape) -> tuple[float, float]:
    """Split a target entropy h in [d-1, d] into (uniform, escaping)
    mixture weights (h - (d-1), d - h).  Both are exact in floating
    point for h in range, and they sum to exactly 1."""
    d = shape.d
    if not (d - 1 <= h <= d):
        raise OutOfRange(f"h must lie in [{d - 1}, {d}], got {h}")
    return (float(h) - (d - 1), d - float(h))


def mixture_entropy(h: float, shape: FlowShape, cusp_entropy=None) -> float:
    """Ledger entropy of the mixture: uniform weight times d plus
    escaping weight times the escaping component's entropy (default
    d - 1).  Computed in exact rational arithmetic, so with the default
    it returns h itself to the last bit."""
    d = shape.d
    if cusp_entropy is None:
        cusp_entropy = d - 1
    hw, cw = mixture_weights(h, shape)
    exact = Fraction(hw) * d + Fraction(cw) * Fraction(cusp_entropy)
    return float(exact)


# ---------------------------------------------------------------------------
# CSV


def measure_to_csv(mu: EmpiricalMeasure) -> str:
    d = mu.atoms[0][0].shape.d
    header = "weight," + ",".join(f"b{i}{j}" for i in range(1, d + 1) for j in range(1, d + 1))
    lines = [header]
    for basis, w in mu.atoms:
        entries = ",".join(f"{x:.17g}" for x in basis.columns.ravel())
        lines.append(f"{w:.17g},{entries}")
    return "\n".join(lines) + "\n"


def measure_from_csv(text: str, shape: FlowShape) -> EmpiricalMeasure:
    d = shape.d
    atoms = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("weight"):
            continue
        vals = [float(x) for x in line.split(",")]
        if len(vals) != 1 + d * d:
            raise ValueError(f"expected 1 + {d * d} fields per row, got {len(vals)}")
        cols = np.array(vals[1:], dtype=float).reshape(d, d)
        atoms.append((LatticeBasis(shape, cols), vals[0]))
    return EmpiricalMeasure(atoms)
