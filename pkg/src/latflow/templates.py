"""Piecewise-linear paths with exact rational data, and the template
axioms that make such a path a legal shadow of a log-minima trajectory.

A path stores breakpoints and values as `fractions.Fraction`;
everything in this module (validation, equality blocks, contraction
rates) is computed in exact rational arithmetic with no tolerances.
Floats enter only when a caller evaluates a path at a float time, and
the conversion float -> Fraction is exact.

A path may declare an eventually-periodic tail: the final `period` of
the explicit window is the repeating motif, and each repeat is shifted
by a fixed additive offset vector (zero offset for the bounded
templates this package builds).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from .lattice import FlowShape


class MalformedTemplate(ValueError):
    """Template combinatorics are undefined (no integral split of an
    equality block, or components cross inside a linearity interval)."""


class NotEventuallyPeriodic(ValueError):
    """Asymptotic contraction average requested for a path without a
    zero-offset periodic tail."""


class DomainMismatch(ValueError):
    """Evaluation or window outside the path's domain."""


class TemplateParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


def _frac(x) -> Fraction:
    # Fraction(float) is the exact binary value, which is what we want:
    # float sample times stay comparable across the rational machinery.
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational")


@dataclass(frozen=True)
class PeriodicTail:
    period: Fraction
    offset: tuple[Fraction, ...]

    @property
    def drifts(self) -> bool:
        return any(o != 0 for o in self.offset)


class PiecewiseLinearPath:
    """Continuous piecewise-linear f: [t_0, T] -> R^dims (or [t_0, inf)
    with a periodic tail), with rational breakpoints and values."""

    __slots__ = ("dims", "breakpoints", "values", "tail")

    def __init__(self, breakpoints, values, tail: PeriodicTail | None = None):
        bps = tuple(_frac(b) for b in breakpoints)
        if len(bps) < 2:
            raise ValueError("need at least two breakpoints")
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly ascending")
        rows = tuple(tuple(_frac(v) for v in row) for row in values)
        if len(rows) != len(bps):
            raise ValueError("one value row per breakpoint required")
        dims = len(rows[0])
        if dims < 1 or any(len(r) != dims for r in rows):
            raise ValueError("value rows must share a positive width")
        if tail is not None:
            if tail.period <= 0:
                raise ValueError("tail period must be positive")
            if len(tail.offset) != dims:
                raise ValueError("tail offset width mismatch")
            if bps[-1] - tail.period < bps[0]:
                raise ValueError("explicit window must contain one full period")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", rows)
        object.__setattr__(self, "tail", tail)
        if tail is not None:
            motif_start = self._explicit_value(bps[-1] - tail.period)
            expect = tuple(v + o for v, o in zip(motif_start, tail.offset))
            if expect != rows[-1]:
                raise ValueError("periodic tail is discontinuous at the seam")

    def __setattr__(self, *_):
        raise AttributeError("PiecewiseLinearPath is immutable")

    # -- domain ----------------------------------------------------------

    @property
    def t_start(self) -> Fraction:
        return self.breakpoints[0]

    @property
    def t_end(self) -> Fraction:
        """End of the explicit window (domain extends beyond iff periodic)."""
        return self.breakpoints[-1]

    @property
    def is_finite(self) -> bool:
        return self.tail is None

    def covers(self, t) -> bool:
        t = _frac(t)
        return t >= self.t_start and (self.tail is not None or t <= self.t_end)

    # -- evaluation ------------------------------------------------------

    def _explicit_value(self, t: Fraction) -> tuple[Fraction, ...]:
        bps = self.breakpoints
        i = bisect_right(bps, t) - 1
        if i == len(bps) - 1:
            return self.values[-1]
        lo, hi = bps[i], bps[i + 1]
        va, vb = self.values[i], self.values[i + 1]
        w = (t - lo) / (hi - lo)
        return tuple(a + (b - a) * w for a, b in zip(va, vb))

    def value(self, t) -> tuple[Fraction, ...]:
        """Exact value at time t (accepts Fraction, int, float, str)."""
        t = _frac(t)
        if t < self.t_start:
            raise DomainMismatch(f"t={t} before path start {self.t_start}")
        if t <= self.t_end:
            return self._explicit_value(t)
        if self.tail is None:
            raise DomainMismatch(f"t={t} beyond finite path end {self.t_end}")
        excess = t - self.t_end
        k = excess // self.tail.period
        if k * self.tail.period < excess:
            k += 1
        base = self._explicit_value(t - k * self.tail.period)
        return tuple(v + k * o for v, o in zip(base, self.tail.offset))

    def segment_slopes(self) -> list[tuple[Fraction, ...]]:
        """Per explicit segment, the slope vector (exact)."""
        out = []
        for i in range(len(self.breakpoints) - 1):
            dt = self.breakpoints[i + 1] - self.breakpoints[i]
            va, vb = self.values[i], self.values[i + 1]
            out.append(tuple((b - a) / dt for a, b in zip(va, vb)))
        return out

    # -- transforms ------------------------------------------------------

    def materialized(self, through) -> "PiecewiseLinearPath":
        """Finite path of the same function covering [t_start, >= through].

        Periodic repeats are unrolled breakpoint by breakpoint; a finite
        path is returned unchanged if it already covers `through`.
        """
        through = _frac(through)
        if self.tail is None:
            if through > self.t_end:
                raise DomainMismatch("finite path cannot be extended")
            return self
        if through <= self.t_end:
            return PiecewiseLinearPath(self.breakpoints, self.values, None)
        period, offset = self.tail.period, self.tail.offset
        motif_lo = self.t_end - period
        idx = [i for i, b in enumerate(self.breakpoints) if motif_lo < b <= self.t_end]
        bps = list(self.breakpoints)
        rows = list(self.values)
        k = 1
        while bps[-1] < through:
            shift = k * period
            for i in idx:
                bps.append(self.breakpoints[i] + shift)
                rows.append(
                    tuple(v + k * o for v, o in zip(self.values[i], offset))
                )
            k += 1
        return PiecewiseLinearPath(bps, rows, None)

    def scaled(self, factor) -> "PiecewiseLinearPath":
        """Scale both axes by `factor` > 0; slopes are preserved exactly."""
        c = _frac(factor)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        tail = None
        if self.tail is not None:
            tail = PeriodicTail(self.tail.period * c, tuple(o * c for o in self.tail.offset))
        return PiecewiseLinearPath(
            [b * c for b in self.breakpoints],
            [tuple(v * c for v in row) for row in self.values],
            tail,
        )

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseLinearPath)
            and self.breakpoints == other.breakpoints
            and self.values == other.values
            and self.tail == other.tail
        )

    def __repr__(self):
        kind = "finite" if self.tail is None else f"periodic:{self.tail.period}"
        return (
            f"PiecewiseLinearPath(dims={self.dims}, "
            f"[{self.t_start}, {self.t_end}], {kind})"
        )


@dataclass(frozen=True)
class Template:
    """A path paired with the flow shape it is meant to shadow.

    Construction does not validate the axioms; run validate_template and
    inspect the violations.
    """

    path: PiecewiseLinearPath
    shape: FlowShape

    def __post_init__(self):
        if self.path.dims != self.shape.d:
            raise ValueError(
                f"path has {self.path.dims} components, shape needs {self.shape.d}"
            )


@dataclass(frozen=True)
class Violation:
    axiom: str  # "ordering" | "slope-range" | "block-convexity"
    interval: tuple[Fraction, Fraction] | None
    index: int | None
    message: str

    def __str__(self):
        where = f" on ({self.interval[0]}, {self.interval[1]})" if self.interval else ""
        return f"[{self.axiom}]{where} {self.message}"


def zero_template(shape: FlowShape, period: Fraction | int = 1) -> Template:
    """The identically-zero template with a declared periodic tail."""
    period = _frac(period)
    zero = tuple(Fraction(0) for _ in range(shape.d))
    path = PiecewiseLinearPath([0, period], [zero, zero], PeriodicTail(period, zero))
    return Template(path, shape)


# ---------------------------------------------------------------------------
# validation


def _as_template(obj, shape) -> Template:
    if isinstance(obj, Template):
        return obj
    if shape is None:
        raise ValueError("shape required when validating a bare path")
    return Template(obj, shape)


def _working_path(path: PiecewiseLinearPath) -> PiecewiseLinearPath:
    # Two extra periods: the strictness pattern of the repeats stabilises
    # after the first shifted copy, so every slope sequence and junction
    # the infinite tail will ever produce already occurs in this window.
    if path.tail is None:
        return path
    return path.materialized(path.t_end + 2 * path.tail.period)


def allowed_partial_slopes(shape: FlowShape, j: int) -> set[Fraction]:
    """Slopes L+/m - L-/n with L+ + L- = j, 0 <= L+ <= m, 0 <= L- <= n."""
    out = set()
    for lp in range(max(0, j - shape.n), min(shape.m, j) + 1):
        lm = j - lp
        out.add(Fraction(lp, shape.m) - Fraction(lm, shape.n))
    return out


def _strict_regions(work: PiecewiseLinearPath, j: int) -> list[tuple[Fraction, Fraction]]:
    """Maximal intervals where f_j < f_{j+1} (1-based; f_0 = -inf and
    f_{d+1} = +inf make j = 0 and j = dims the whole domain)."""
    if j == 0 or j == work.dims:
        return [(work.t_start, work.t_end)]
    bps, rows = work.breakpoints, work.values
    gaps = [row[j] - row[j - 1] for row in rows]
    pieces: list[tuple[Fraction, Fraction, bool]] = []  # (lo, hi, hi is a breakpoint with gap>0)

    for i in range(len(bps) - 1):
        ga, gb = gaps[i], gaps[i + 1]
        lo, hi = bps[i], bps[i + 1]
        if ga > 0 and gb > 0:
            pieces.append((lo, hi, True))
        elif ga > 0 and gb <= 0:
            root = lo + (hi - lo) * ga / (ga - gb) if gb < 0 else hi
            pieces.append((lo, root, False))
        elif ga <= 0 and gb > 0:
            root = lo + (hi - lo) * (-ga) / (gb - ga) if ga < 0 else lo
            pieces.append((root, hi, True))
        # ga <= 0 and gb <= 0: affine gap cannot be positive inside

    # Merge consecutive pieces only across a junction where the gap is
    # strictly positive; a tangential touch (gap == 0) separates maximal
    # open regions and convexity is not required across it.
    regions: list[tuple[Fraction, Fraction]] = []
    open_hi = None
    for lo, hi, strict_hi in pieces:
        if open_hi is not None and regions and regions[-1][1] == lo and open_hi:
            regions[-1] = (regions[-1][0], hi)
        else:
            regions.append((lo, hi))
        open_hi = strict_hi
    return regions


def validate_template(path_or_template, shape: FlowShape | None = None) -> list[Violation]:
    """Check the three template axioms; exact, no tolerances.

    Returns all violations found (empty list == valid).  For periodic
    paths the explicit window plus two unrolled periods is checked,
    which certifies the infinite tail; a drifting tail additionally
    requires the per-period offsets to preserve the component ordering.
    """
    tpl = _as_template(path_or_template, shape)
    path, shape = tpl.path, tpl.shape
    m, n, d = shape.m, shape.n, shape.d
    work = _working_path(path)
    out: list[Violation] = []

    # ordering at every breakpoint of the working window
    for bp, row in zip(work.breakpoints, work.values):
        for i in range(d - 1):
            if row[i] > row[i + 1]:
                out.append(
                    Violation(
                        "ordering",
                        (bp, bp),
                        i + 1,
                        f"f_{i + 1}({bp}) = {row[i]} > f_{i + 2}({bp}) = {row[i + 1]}",
                    )
                )
    if path.tail is not None and path.tail.drifts:
        off = path.tail.offset
        for i in range(d - 1):
            if off[i] > off[i + 1]:
                out.append(
                    Violation(
                        "ordering",
                        (path.t_end, path.t_end),
                        i + 1,
                        f"tail offset decreases across components {i + 1},{i + 2}; "
                        "ordering fails after finitely many periods",
                    )
                )

    # slope range on every segment
    lo_slope, hi_slope = Fraction(-1, n), Fraction(1, m)
    slopes = work.segment_slopes()
    bps = work.breakpoints
    for k, sl in enumerate(slopes):
        for i, s in enumerate(sl):
            if s < lo_slope or s > hi_slope:
                out.append(
                    Violation(
                        "slope-range",
                        (bps[k], bps[k + 1]),
                        i + 1,
                        f"f_{i + 1} has slope {s} outside [-1/{n}, 1/{m}]",
                    )
                )

    # partial-sum convexity with quantised slopes, per strict region
    for j in range(1, d + 1):
        allowed = allowed_partial_slopes(shape, j)
        psum = [sum(sl[:j]) for sl in slopes]
        for rlo, rhi in _strict_regions(work, j):
            seg_ids = [
                k
                for k in range(len(slopes))
                if bps[k + 1] > rlo and bps[k] < rhi
            ]
            prev = None
            for k in seg_ids:
                s = psum[k]
                if s not in allowed:
                    out.append(
                        Violation(
                            "block-convexity",
                            (max(bps[k], rlo), min(bps[k + 1], rhi)),
                            j,
                            f"partial sum f_1+..+f_{j} has slope {s} outside the "
                            f"quantised set for j={j}",
                        )
                    )
                if prev is not None and s < prev:
                    out.append(
                        Violation(
                            "block-convexity",
                            (bps[k], bps[k]),
                            j,
                            f"partial sum f_1+..+f_{j} is concave across t={bps[k]} "
                            f"({prev} -> {s}) inside a strict region",
                        )
                    )
                prev = s
    return out


# ---------------------------------------------------------------------------
# linearity intervals, equality blocks, contraction


def linearity_intervals(path: PiecewiseLinearPath, window) -> list[tuple[Fraction, Fraction]]:
    """Open intervals between consecutive declared breakpoints, clipped
    to the window.  Redundant breakpoints (no slope change) are kept;
    all downstream quantities are invariant under that subdivision."""
    lo, hi = (_frac(w) for w in window)
    if lo >= hi:
        raise ValueError("window must have positive length")
    if lo < path.t_start or not path.covers(hi):
        raise DomainMismatch(f"window ({lo}, {hi}) outside path domain")
    work = path if (path.tail is None or hi <= path.t_end) else path.materialized(hi)
    cuts = [lo] + [b for b in work.breakpoints if lo < b < hi] + [hi]
    return list(zip(cuts, cuts[1:]))


@dataclass(frozen=True)
class EqualityBlock:
    """Maximal run (p, q] of mutually equal components on an interval,
    with its forced split into M+ expanding and M- contracting slots."""

    p: int
    q: int
    m_plus: int
    m_minus: int


@dataclass(frozen=True)
class ProfileInterval:
    lo: Fraction
    hi: Fraction
    s_plus: frozenset[int]
    s_minus: frozenset[int]
    delta: int


@dataclass(frozen=True)
class ContractionProfile:
    intervals: tuple[ProfileInterval, ...]

    def integral(self) -> Fraction:
        return sum(((iv.hi - iv.lo) * iv.delta for iv in self.intervals), Fraction(0))


def equality_blocks(template: Template, interval) -> list[EqualityBlock]:
    """Equality blocks of the template on one interval of linearity.

    Raises MalformedTemplate if the components are not sorted on the
    interval, or a block's slope sum admits no integral (M+, M-) split.
    """
    path, shape = template.path, template.shape
    lo, hi = (_frac(x) for x in interval)
    if lo >= hi:
        raise ValueError("interval must have positive length")
    t1 = lo + (hi - lo) / 3
    t2 = lo + 2 * (hi - lo) / 3
    v1, v2 = path.value(t1), path.value(t2)
    d = shape.d
    for v in (v1, v2):
        for i in range(d - 1):
            if v[i] > v[i + 1]:
                raise MalformedTemplate(
                    f"components out of order on ({lo}, {hi}); validate first"
                )
    # group consecutive equal components; equality must hold at both
    # probes or the functions cross inside the interval
    bounds = [0]
    for i in range(d - 1):
        eq1, eq2 = v1[i] == v1[i + 1], v2[i] == v2[i + 1]
        if eq1 != eq2:
            raise MalformedTemplate(
                f"components {i + 1},{i + 2} cross inside ({lo}, {hi}): "
                "not an interval of linearity"
            )
        if not eq1:
            bounds.append(i + 1)
    bounds.append(d)

    blocks = []
    for p, q in zip(bounds, bounds[1:]):
        sigma = (sum(v2[p:q]) - sum(v1[p:q])) / (t2 - t1)
        # unique M+ with M+ + M- = q - p and M+/m - M-/n = sigma
        m_plus = (sigma * shape.m * shape.n + (q - p) * shape.m) / (shape.m + shape.n)
        if m_plus.denominator != 1 or not (0 <= m_plus <= q - p):
            raise MalformedTemplate(
                f"block ({p}, {q}] on ({lo}, {hi}): slope sum {sigma} has no "
                f"integral split (M+ = {m_plus})"
            )
        blocks.append(EqualityBlock(p, q, int(m_plus), q - p - int(m_plus)))
    return blocks


def contraction_profile(template: Template, window) -> ContractionProfile:
    """Per linearity interval: the expanding set S+, the contracting set
    S-, and the pair count delta = #{(i+, i-) in S+ x S- : i+ < i-}."""
    ivs = []
    for lo, hi in linearity_intervals(template.path, window):
        s_plus, s_minus = set(), set()
        for b in equality_blocks(template, (lo, hi)):
            s_plus.update(range(b.p + 1, b.p + b.m_plus + 1))
            s_minus.update(range(b.p + b.m_plus + 1, b.q + 1))
        delta = sum(1 for ip in s_plus for im in s_minus if ip < im)
        ivs.append(ProfileInterval(lo, hi, frozenset(s_plus), frozenset(s_minus), delta))
    return ContractionProfile(tuple(ivs))


def average_contraction(template: Template, t_lo, t_hi) -> Fraction:
    """Time average of delta over [t_lo, t_hi], exact."""
    lo, hi = _frac(t_lo), _frac(t_hi)
    profile = contraction_profile(template, (lo, hi))
    return profile.integral() / (hi - lo)


def lower_average_contraction(template: Template) -> Fraction:
    """Asymptotic average of delta, i.e. the liminf of window averages.

    Defined here for paths with a zero-offset periodic tail, where the
    liminf is simply the average over one period; drifting tails are
    refused.
    """
    tail = template.path.tail
    if tail is None:
        raise NotEventuallyPeriodic("path is finite; no asymptotic average")
    if tail.drifts:
        raise NotEventuallyPeriodic("tail drifts; asymptotic average not supported")
    t_end = template.path.t_end
    return average_contraction(template, t_end - tail.period, t_end)


# ---------------------------------------------------------------------------
# text serialization


def _fmt_frac(x: Fraction) -> str:
    return str(x)  # "p/q", or "p" when q == 1


def template_to_text(template: Template) -> str:
    """Bit-exact text form; see template_from_text for the grammar."""
    path, shape = template.path, template.shape
    if path.tail is None:
        tail = "finite"
    elif path.tail.drifts:
        raise ValueError("drifting periodic tails have no text form")
    else:
        tail = f"periodic:{_fmt_frac(path.tail.period)}"
    lines = [f"template d={shape.d} m={shape.m} n={shape.n} tail={tail}"]
    for bp, row in zip(path.breakpoints, path.values):
        lines.append(f"t={_fmt_frac(bp)} v={','.join(_fmt_frac(v) for v in row)}")
    return "\n".join(lines) + "\n"


def template_from_text(text: str) -> Template:
    """Parse the template text format.

        template d=<d> m=<m> n=<n> tail=<finite|periodic:<rational>>
        t=<rational> v=<rational>,...   (one line per breakpoint)

    Rationals are `p/q` or a bare integer.  Raises TemplateParseError
    with the offending line number.
    """
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            if not line.startswith("template "):
                raise TemplateParseError(lineno, "expected 'template ...' header")
            fields = {}
            for tok in line.split()[1:]:
                if "=" not in tok:
                    raise TemplateParseError(lineno, f"malformed header field {tok!r}")
                k, v = tok.split("=", 1)
                fields[k] = v
            for key in ("d", "m", "n", "tail"):
                if key not in fields:
                    raise TemplateParseError(lineno, f"header missing '{key}='")
            try:
                d, m, n = int(fields["d"]), int(fields["m"]), int(fields["n"])
            except ValueError as e:
                raise TemplateParseError(lineno, f"bad header integer: {e}") from None
            if d != m + n:
                raise TemplateParseError(lineno, f"d={d} does not equal m+n={m + n}")
            tail_spec = fields["tail"]
            header = (d, m, n, tail_spec, lineno)
            continue
        if not line.startswith("t="):
            raise TemplateParseError(lineno, "expected 't=<rational> v=...'")
        try:
            tpart, vpart = line.split(None, 1)
        except ValueError:
            raise TemplateParseError(lineno, "missing v= field") from None
        if not vpart.startswith("v="):
            raise TemplateParseError(lineno, "second field must be v=...")
        try:
            t = Fraction(tpart[2:])
            vals = tuple(Fraction(p) for p in vpart[2:].split(","))
        except (ValueError, ZeroDivisionError) as e:
            raise TemplateParseError(lineno, f"bad rational: {e}") from None
        rows.append((lineno, t, vals))

    if header is None:
        raise TemplateParseError(1, "empty input")
    d, m, n, tail_spec, header_line = header
    if len(rows) < 2:
        raise TemplateParseError(header_line, "need at least two breakpoint lines")
    for lineno, _, vals in rows:
        if len(vals) != d:
            raise TemplateParseError(lineno, f"expected {d} components, got {len(vals)}")

    tail = None
    if tail_spec != "finite":
        if not tail_spec.startswith("periodic:"):
            raise TemplateParseError(header_line, f"bad tail spec {tail_spec!r}")
        try:
            period = Fraction(tail_spec[len("periodic:"):])
        except (ValueError, ZeroDivisionError) as e:
            raise TemplateParseError(header_line, f"bad period: {e}") from None
        tail = PeriodicTail(period, tuple(Fraction(0) for _ in range(d)))

    try:
        path = PiecewiseLinearPath(
            [t for _, t, _ in rows], [vals for _, _, vals in rows], tail
        )
        return Template(path, FlowShape(m, n))
    except ValueError as e:
        raise TemplateParseError(header_line, str(e)) from None
