"""Unimodular lattices under a two-block diagonal flow.

The flow acts on R^d, d = m + n, by expanding the first m coordinates at
rate 1/m and contracting the last n at rate 1/n, so the matrix stays in
SL_d(R).  The lattices of interest are u_A Z^d where u_A is the upper
unipotent block matrix built from an m x n perturbation A; their
successive minima (in the sup norm) along the flow are the raw material
for everything else in this package.

Minima are computed by reducing the basis and then exhaustively
enumerating integer coefficient vectors inside a certified radius, so
the results are exact up to floating-point evaluation of vector norms.
All functions here are pure; they are safe to call from worker
processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DEFAULT_ENUM_BUDGET = 1_000_000

# Tolerances, kept in one place.  DET_TOL gates basis construction;
# SLOPE_TOL pads the per-sample Lipschitz check on log-minima paths.
DET_TOL = 1e-9
SLOPE_TOL = 1e-6


class EnumerationBudgetExceeded(RuntimeError):
    """Coefficient search space exceeded the configured bound.

    Usually signals an ill-conditioned basis; reduce (or rescale) the
    basis, or raise the budget.  When raised from a path computation the
    offending flow time is attached as ``.time``.
    """

    def __init__(self, message: str, budget: int, time: float | None = None):
        super().__init__(message)
        self.budget = budget
        self.time = time


@dataclass(frozen=True)
class FlowShape:
    """Block sizes (m, n) of the diagonal flow; d = m + n."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"block sizes must be positive, got ({self.m}, {self.n})")

    @property
    def d(self) -> int:
        return self.m + self.n

    def expansion_rate(self) -> float:
        """Rate 1/m + 1/n at which the unipotent direction is expanded."""
        return 1.0 / self.m + 1.0 / self.n


class PerturbationMatrix:
    """An m x n real matrix taken mod 1, the coordinate on the torus of
    unipotent perturbations.  Entries are stored as the canonical
    representative in [0, 1); reduction is idempotent."""

    __slots__ = ("shape", "entries")

    def __init__(self, shape: FlowShape, entries):
        a = np.asarray(entries, dtype=float).reshape(shape.m, shape.n)
        a = np.mod(a, 1.0)
        # -1e-20 % 1.0 == 0.9999... is canonical; 1.0 % 1.0 == 0.0. Nothing
        # else to fix up.
        a.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "entries", a)

    def __setattr__(self, *_):
        raise AttributeError("PerturbationMatrix is immutable")

    @classmethod
    def zero(cls, shape: FlowShape) -> "PerturbationMatrix":
        return cls(shape, np.zeros((shape.m, shape.n)))

    @classmethod
    def from_flat(cls, shape: FlowShape, values) -> "PerturbationMatrix":
        """Build from row-major entries a11, ..., amn."""
        return cls(shape, np.asarray(values, dtype=float))

    def flat(self) -> tuple[float, ...]:
        return tuple(self.entries.reshape(-1))

    def __eq__(self, other):
        return (
            isinstance(other, PerturbationMatrix)
            and self.shape == other.shape
            and np.array_equal(self.entries, other.entries)
        )

    def __hash__(self):
        return hash((self.shape, self.entries.tobytes()))

    def __repr__(self):
        return f"PerturbationMatrix({self.shape.m}x{self.shape.n}, {self.flat()})"


class LatticeBasis:
    """Columns of a basis of a unimodular lattice in R^d.

    |det| must be 1 within DET_TOL; anything further from unimodularity
    is a usage error and is rejected.
    """

    __slots__ = ("shape", "columns", "det")

    def __init__(self, shape: FlowShape, columns):
        cols = np.array(columns, dtype=float)
        d = shape.d
        if cols.shape != (d, d):
            raise ValueError(f"basis must be {d}x{d}, got {cols.shape}")
        det = float(np.linalg.det(cols))
        if abs(abs(det) - 1.0) > DET_TOL:
            raise ValueError(f"basis is not unimodular: |det| = {abs(det)!r}")
        cols.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "det", det)

    def __setattr__(self, *_):
        raise AttributeError("LatticeBasis is immutable")

    def __repr__(self):
        return f"LatticeBasis(d={self.shape.d})"


@dataclass(frozen=True)
class MinimaVector:
    """Successive minima values, ascending and positive."""

    values: tuple[float, ...]

    def __post_init__(self):
        for i, v in enumerate(self.values):
            if v <= 0:
                raise ValueError(f"minimum {i + 1} is not positive: {v}")
            if i and v < self.values[i - 1]:
                raise ValueError("minima must be ascending")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def product(self) -> float:
        return float(np.prod(self.values))


@dataclass(frozen=True)
class MinimaPath:
    """Sampled log successive minima h_i(t) along the flow.

    Rows are ascending in each sample; between consecutive samples at gap
    s > 0 each component moves within [-s/n - tol, s/m + tol], which is
    the per-coordinate operator bound of the flow and is enforced here
    so that a path object is always a plausible flow observation.
    """

    shape: FlowShape
    times: tuple[float, ...]
    logs: np.ndarray = field(repr=False)

    def __post_init__(self):
        logs = np.asarray(self.logs, dtype=float)
        if logs.shape != (len(self.times), self.shape.d):
            raise ValueError("logs must be (len(times), d)")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly ascending")
        if np.any(np.diff(logs, axis=1) < -1e-12):
            raise ValueError("each row must be ascending (sorted minima)")
        gaps = np.diff(np.asarray(self.times))
        if gaps.size:
            steps = np.diff(logs, axis=0)
            lo = -gaps[:, None] / self.shape.n - SLOPE_TOL
            hi = gaps[:, None] / self.shape.m + SLOPE_TOL
            if np.any(steps < lo) or np.any(steps > hi):
                raise ValueError("log-minima increments violate the flow's slope bounds")
        logs.setflags(write=False)
        object.__setattr__(self, "logs", logs)
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))


def flow_matrix(shape: FlowShape, t: float) -> np.ndarray:
    """Diagonal flow matrix diag(e^{t/m} I_m, e^{-t/n} I_n); det = 1 by
    construction."""
    em = math.exp(t / shape.m)
    en = math.exp(-t / shape.n)
    return np.diag([em] * shape.m + [en] * shape.n)


def unipotent(A) -> LatticeBasis:
    """Upper unipotent block matrix [[I_m, A], [0, I_n]] as a lattice basis.

    Accepts a PerturbationMatrix (canonical torus representative) or a
    raw m x n array, which is used as given; the two give the same
    lattice whenever they differ by an integer matrix.
    """
    if isinstance(A, PerturbationMatrix):
        shape, a = A.shape, A.entries
    else:
        a = np.asarray(A, dtype=float)
        if a.ndim != 2:
            raise ValueError("perturbation must be a 2-d array")
        shape = FlowShape(a.shape[0], a.shape[1])
    d, m = shape.d, shape.m
    cols = np.eye(d)
    cols[:m, m:] = a
    return LatticeBasis(shape, cols)


def flowed_basis(shape: FlowShape, A, t: float) -> LatticeBasis:
    """Basis of a_t u_A Z^d."""
    return LatticeBasis(shape, flow_matrix(shape, t) @ unipotent(A).columns)


# ---------------------------------------------------------------------------
# reduction + enumeration


def _gram_schmidt(B: np.ndarray):
    d = B.shape[1]
    bstar = np.zeros_like(B)
    mu = np.zeros((d, d))
    norms = np.zeros(d)
    for i in range(d):
        v = B[:, i].astype(float).copy()
        for j in range(i):
            if norms[j] > 0:
                mu[i, j] = (B[:, i] @ bstar[:, j]) / norms[j]
                v -= mu[i, j] * bstar[:, j]
        bstar[:, i] = v
        norms[i] = v @ v
    return bstar, mu, norms


def _lll_transform(B: np.ndarray, delta: float = 0.99, max_rounds: int = 10_000):
    """Integer unimodular U with B @ U LLL-reduced (textbook float variant).

    U is tracked in exact integer arithmetic, so B @ U is always a basis
    of the same lattice regardless of floating drift in the working copy.
    The round cap only bounds the work; any U returned is valid.
    """
    d = B.shape[1]
    W = B.astype(float).copy()
    U = [[1 if i == j else 0 for j in range(d)] for i in range(d)]  # python ints

    def col_op(k, j, r):
        W[:, k] -= r * W[:, j]
        for row in U:
            row[k] -= r * row[j]

    def swap(k, j):
        W[:, [k, j]] = W[:, [j, k]]
        for row in U:
            row[k], row[j] = row[j], row[k]

    rounds = 0
    k = 1
    bstar, mu, norms = _gram_schmidt(W)
    while k < d and rounds < max_rounds:
        rounds += 1
        for j in range(k - 1, -1, -1):
            r = round(mu[k, j])
            if r:
                col_op(k, j, int(r))
                bstar, mu, norms = _gram_schmidt(W)
        if norms[k] >= (delta - mu[k, k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            swap(k, k - 1)
            bstar, mu, norms = _gram_schmidt(W)
            k = max(k - 1, 1)
    return np.array(U, dtype=object)


def _enumerate_ball(R: np.ndarray, radius: float, budget: int):
    """All nonzero integer c with ||R c||_2 <= radius, by depth-first
    Fincke-Pohst over the Gram-Schmidt coordinates of R.

    Returns an int64 array of shape (k, d).  Raises
    EnumerationBudgetExceeded once more than `budget` tree nodes have
    been visited.
    """
    d = R.shape[1]
    _, mu, norms = _gram_schmidt(R)
    if np.any(norms <= 0):
        raise EnumerationBudgetExceeded("degenerate basis in enumeration", budget)
    target = radius * radius * (1 + 1e-12)
    out = []
    c = [0] * d
    visited = 0

    def descend(level: int, remaining: float):
        nonlocal visited
        # coordinate of the candidate along bstar_level is c_level + shift
        shift = sum(mu[j, level] * c[j] for j in range(level + 1, d))
        bound = math.sqrt(max(remaining, 0.0) / norms[level])
        lo = math.ceil(-bound - shift - 1e-12)
        hi = math.floor(bound - shift + 1e-12)
        for ci in range(lo, hi + 1):
            visited += 1
            if visited > budget:
                raise EnumerationBudgetExceeded(
                    f"enumeration exceeded budget of {budget} nodes", budget
                )
            c[level] = ci
            used = (ci + shift) ** 2 * norms[level]
            if used > remaining + 1e-12:
                continue
            if level == 0:
                if any(c):
                    out.append(tuple(c))
            else:
                descend(level - 1, remaining - used)
        c[level] = 0

    descend(d - 1, target)
    if not out:
        return np.zeros((0, d), dtype=np.int64)
    return np.array(out, dtype=np.int64)


def _independent_prefix_rank(rows: list[tuple[int, ...]], new_row) -> bool:
    """True if new_row is Q-linearly independent of rows (exact)."""
    mat = [list(map(Fraction, r)) for r in rows] + [list(map(Fraction, new_row))]
    cols = len(new_row)
    rank = 0
    for col in range(cols):
        pivot = None
        for r in range(rank, len(mat)):
            if mat[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        inv = mat[rank][col]
        for r in range(rank + 1, len(mat)):
            if mat[r][col] != 0:
                f = mat[r][col] / inv
                for cc in range(col, cols):
                    mat[r][cc] -= f * mat[rank][cc]
        rank += 1
    return rank == len(mat)


def successive_minima(
    basis: LatticeBasis, count: int | None = None, *, budget: int = DEFAULT_ENUM_BUDGET
) -> MinimaVector:
    """First `count` successive minima of the lattice in the sup norm.

    The basis is LLL-reduced, every integer combination within a
    certified radius is enumerated, and the minima are read off by a
    greedy rank-growing sweep in ascending norm order.  For a full
    vector (count == d) the Minkowski product bound is asserted as a
    numerical sanity gate.
    """
    d = basis.shape.d
    if count is None:
        count = d
    if count < 0 or count > d:
        raise ValueError(f"count must be in [0, {d}]")
    if count == 0:
        return MinimaVector(())

    B = basis.columns
    U = _lll_transform(B)
    R = (B @ U).astype(float)

    sup = np.max(np.abs(R), axis=0)
    # The `count` smallest reduced columns are independent, so the
    # count-th smallest column sup-norm bounds lambda_count from above.
    t_sup = float(np.sort(sup)[count - 1])
    radius = math.sqrt(d) * t_sup * (1 + 1e-9)
    cands = _enumerate_ball(R, radius, budget)

    # Back to coefficients w.r.t. the caller's basis; norms are evaluated
    # against the original columns so that independent search strategies
    # produce bit-identical values.
    orig = (cands @ np.array(U, dtype=object).T).astype(np.int64)
    vecs = B @ orig.T.astype(float)
    norms = np.max(np.abs(vecs), axis=0)

    order = sorted(range(len(norms)), key=lambda i: (norms[i], tuple(orig[i])))
    kept: list[tuple[int, ...]] = []
    values: list[float] = []
    for i in order:
        row = tuple(int(x) for x in orig[i])
        if _independent_prefix_rank(kept, row):
            kept.append(row)
            values.append(float(norms[i]))
            if len(kept) == count:
                break
    if len(values) < count:
        raise RuntimeError("enumeration radius failed to certify the requested minima")

    if count == d:
        prod = float(np.prod(values))
        lo = 1.0 / math.factorial(d)
        if not (lo * (1 - 1e-6) <= prod <= 1 + 1e-6):
            raise RuntimeError(
                f"Minkowski product gate failed: prod={prod!r} outside [{lo}, 1]"
            )
    return MinimaVector(tuple(values))


def minima_path(
    shape: FlowShape, A, times, *, budget: int = DEFAULT_ENUM_BUDGET
) -> MinimaPath:
    """Log successive minima t -> log lambda_i(a_t u_A Z^d) at the given
    sample times (need not be evenly spaced, must be ascending)."""
    rows = []
    for t in times:
        try:
            mv = successive_minima(flowed_basis(shape, A, float(t)), budget=budget)
        except EnumerationBudgetExceeded as e:
            e.time = float(t)
            raise
        rows.append([math.log(v) for v in mv])
    return MinimaPath(shape, tuple(float(t) for t in times), np.array(rows))


# ---------------------------------------------------------------------------
# CSV


def minima_path_to_csv(path: MinimaPath) -> str:
    d = path.shape.d
    lines = ["t," + ",".join(f"h{i}" for i in range(1, d + 1))]
    for t, row in zip(path.times, path.logs):
        lines.append(",".join(f"{x:.12g}" for x in (t, *row)))
    return "\n".join(lines) + "\n"


def minima_path_from_csv(text: str, shape: FlowShape) -> MinimaPath:
    times, rows = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("t,"):
            continue
        parts = [float(x) for x in line.split(",")]
        if len(parts) != shape.d + 1:
            raise ValueError(f"expected {shape.d + 1} columns, got {len(parts)}")
        times.append(parts[0])
        rows.append(parts[1:])
    return MinimaPath(shape, tuple(times), np.array(rows))
