"""Shared fixtures and the independent brute-force minima oracle.

The oracle deliberately shares no code with the package: minima are read
off an exhaustive coefficient box, with independence decided by exact
rational elimination.  Slow but unarguable.
"""

import hashlib
import math
from fractions import Fraction

import numpy as np
import pytest

from latflow import (
    BandSpec,
    FlowShape,
    PartitionLabeler,
    PerturbationMatrix,
)

# ---------------------------------------------------------------------------
# brute-force sup-norm minima oracle

_BOX_CACHE: dict = {}


def half_box(d: int, R: int = 25) -> np.ndarray:
    """All nonzero integer vectors with |c_i| <= R whose first nonzero
    entry is positive (one representative per +-pair)."""
    key = (d, R)
    if key not in _BOX_CACHE:
        axes = [np.arange(-R, R + 1, dtype=np.int32)] * d
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        nz = grid != 0
        anynz = nz.any(axis=1)
        lead = grid[np.arange(len(grid)), np.argmax(nz, axis=1)]
        _BOX_CACHE[key] = np.ascontiguousarray(grid[anynz & (lead > 0)])
    return _BOX_CACHE[key]


def rank_grows(rows: list, new) -> bool:
    """Exact-rational check that `new` is independent of `rows`."""
    mat = [list(map(Fraction, r)) for r in rows] + [list(map(Fraction, new))]
    rank, cols = 0, len(new)
    for j in range(cols):
        piv = next((i for i in range(rank, len(mat)) if mat[i][j]), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        for i in range(rank + 1, len(mat)):
            if mat[i][j]:
                f = mat[i][j] / mat[rank][j]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[rank])]
        rank += 1
    return rank == len(mat)


def box_minima(B: np.ndarray, R: int = 25, chunk: int = 1 << 19):
    """Successive minima of B over the |c_i| <= R box, plus the largest
    coefficient used (so callers can verify the box was big enough)."""
    d = B.shape[0]
    grid = half_box(d, R)
    norms = np.empty(len(grid))
    for s in range(0, len(grid), chunk):
        blk = grid[s : s + chunk].astype(float)
        norms[s : s + chunk] = np.max(np.abs(B @ blk.T), axis=0)
    K = 512
    while True:
        if K >= len(norms):
            idx = np.argsort(norms, kind="stable")
        else:
            part = np.argpartition(norms, K)[:K]
            idx = part[np.argsort(norms[part], kind="stable")]
        kept, vals, maxc = [], [], 0
        for i in idx:
            row = tuple(int(x) for x in grid[i])
            if rank_grows(kept, row):
                kept.append(row)
                vals.append(float(norms[i]))
                maxc = max(maxc, max(abs(x) for x in row))
                if len(vals) == d:
                    return vals, maxc
        if K >= len(norms):
            raise RuntimeError("box exhausted before reaching full rank")
        K *= 8


def random_unimodular(rng: np.random.Generator, d: int, cond_cap: float = 12.0) -> np.ndarray:
    """Random determinant-one basis with bounded condition number, so
    the oracle box provably contains the minima."""
    while True:
        M = rng.standard_normal((d, d))
        if abs(np.linalg.det(M)) < 0.3:
            continue
        M = M / abs(np.linalg.det(M)) ** (1.0 / d)
        if np.linalg.cond(M) <= cond_cap:
            return M


# ---------------------------------------------------------------------------
# shared fixture constants

SHAPE21 = FlowShape(2, 1)

# Denominator used to quantize the irrational reference points onto an
# exactly representable grid (so every test sees bit-identical inputs).
Q = 1 << 17

# Torus points derived from classical irrational pairs, quantized to
# p/Q; each verified to stay inside FIXTURE_BAND over the whole window.
FIXTURE_POINTS = {
    "sqrt2_sqrt3": (54292, 95951),
    "phi_sqrt2": (81007, 54292),
    "plastic": (42561, 98943),
    "e_pi": (94147, 18559),
}

FIXTURE_BAND = BandSpec(rho=0.01, eta=0.999, t_start=2.0, horizon=15.5, grid_step=0.25)

# Same band cut to a shorter horizon; used where 15.5 would be overkill.
SHORT_BAND = BandSpec(rho=0.01, eta=0.999, t_start=2.0, horizon=8.0, grid_step=0.25)


def fixture_matrix(name: str) -> PerturbationMatrix:
    p, q = FIXTURE_POINTS[name]
    return PerturbationMatrix.from_flat(SHAPE21, (p / Q, q / Q))


def random_feasible_spec(rng: np.random.Generator, shape: FlowShape, max_tries: int = 400):
    """Rejection-sample segment endpoint data until the three formulas
    pass.  Zero-depth specs always pass, so this terminates."""
    from latflow import SegmentSpec, feasibility

    for _ in range(max_tries):
        t0 = Fraction(int(rng.integers(0, 41)), 4)
        dt = Fraction(int(rng.integers(2, 161)), 8)
        e0 = Fraction(int(rng.integers(0, 33)), 16)
        e1 = Fraction(int(rng.integers(0, 33)), 16)
        spec = SegmentSpec(shape, t0, e0, t0 + dt, e1)
        if feasibility(spec).all_pass:
            return spec
    raise AssertionError("rejection sampling failed to find a feasible spec")


def md5_labeler(k: int) -> PartitionLabeler:
    """Deterministic pseudo-random labeler onto k symbols, alphabet
    declared.  The entropy inequality is supposed to hold for arbitrary
    labelings, so a hash is as good as geometry here."""

    def lab(basis):
        digest = hashlib.md5(basis.columns.tobytes()).digest()
        return int.from_bytes(digest[:4], "big") % k

    return PartitionLabeler(lab, alphabet_size=k)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260817)
