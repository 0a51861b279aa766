"""Construction of standard template segments and the repeating
cusp-excursion template built from them.

A segment is specified by its endpoints (t_k, -eps_k) -> (t_{k+1},
-eps_{k+1}) for the smallest component, eps >= 0.  Three feasibility
formulas gate the construction; all margins are exact rationals.  The
segment itself is assembled from two auxiliary piecewise-linear
functions (steepest-descent-first and steepest-ascent-first
interpolants of the endpoint data) plus a balancing component that
keeps the total sum at zero, with a branch switch wherever the
balancing component would fall below the ascent-first interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .lattice import FlowShape
from .templates import (
    MalformedTemplate,
    PeriodicTail,
    PiecewiseLinearPath,
    Template,
    _frac,
    validate_template,
)


class DegenerateShape(ValueError):
    """The construction needs d >= 3; (m, n) = (1, 1) has no balancing
    component."""


class EndpointMismatch(ValueError):
    def __init__(self, junction: int, time, message: str):
        super().__init__(f"junction {junction} at t={time}: {message}")
        self.junction = junction
        self.time = time


class InfeasibleSpec(ValueError):
    """A feasibility formula fails; carries the full report."""

    def __init__(self, report: "FeasibilityReport", part: str = "segment"):
        failed = ", ".join(report.failures())
        super().__init__(f"{part} fails {failed}")
        self.report = report
        self.part = part


@dataclass(frozen=True)
class SegmentSpec:
    """Endpoint data for one standard segment; eps values are the
    (nonnegative) depths of the smallest component at the endpoints."""

    shape: FlowShape
    t_start: Fraction
    eps_start: Fraction
    t_end: Fraction
    eps_end: Fraction

    def __post_init__(self):
        for name in ("t_start", "eps_start", "t_end", "eps_end"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        if self.t_start >= self.t_end:
            raise ValueError("t_start must precede t_end")
        if self.eps_start < 0 or self.eps_end < 0:
            raise ValueError("eps values must be nonnegative")

    @property
    def dt(self) -> Fraction:
        return self.t_end - self.t_start

    @property
    def deps(self) -> Fraction:
        return self.eps_end - self.eps_start


@dataclass(frozen=True)
class FeasibilityReport:
    """Pass/fail plus exact margins for the three segment formulas.

    st1: slope range of the endpoint drift (two-sided, margin = min slack).
    st2: extremal-shape bound, only binding when m == 1 or n == 1
         (margin None when vacuous).
    st3: disjunction freeing one side from the depth constraint; both
         disjunct margins are reported, pass = either >= 0.
    """

    st1_ok: bool
    st1_margin: Fraction
    st2_ok: bool
    st2_margin: Fraction | None
    st3_ok: bool
    st3_margins: tuple[Fraction, Fraction]

    @property
    def all_pass(self) -> bool:
        return self.st1_ok and self.st2_ok and self.st3_ok

    def failures(self) -> list[str]:
        out = []
        if not self.st1_ok:
            out.append("st1")
        if not self.st2_ok:
            out.append("st2")
        if not self.st3_ok:
            out.append("st3")
        return out


def feasibility(spec: SegmentSpec) -> FeasibilityReport:
    """Evaluate the three formulas for one segment, exactly."""
    m, n, d = spec.shape.m, spec.shape.n, spec.shape.d
    dt, de = spec.dt, spec.deps

    # -dt/m <= deps <= dt/n
    st1_slacks = (de + dt / m, dt / n - de)
    st1_margin = min(st1_slacks)

    # binding only at the extremal shapes
    st2_slacks = []
    if m == 1:
        st2_slacks.append(de + Fraction(n - 1, 2 * n) * dt)
    if n == 1:
        st2_slacks.append(Fraction(m - 1, 2 * m) * dt - de)
    st2_margin = min(st2_slacks) if st2_slacks else None
    st2_ok = st2_margin is None or st2_margin >= 0

    # either the contracting phase is long enough to absorb eps_start,
    # or the expanding phase long enough to absorb eps_end
    st3_a = (n - 1) * (dt / n - de) - d * spec.eps_start
    st3_b = (m - 1) * (dt / m + de) - d * spec.eps_end
    return FeasibilityReport(
        st1_ok=st1_margin >= 0,
        st1_margin=st1_margin,
        st2_ok=st2_ok,
        st2_margin=st2_margin,
        st3_ok=st3_a >= 0 or st3_b >= 0,
        st3_margins=(st3_a, st3_b),
    )


def switch_times(spec: SegmentSpec) -> tuple[Fraction, Fraction]:
    """Interior slope-switch times of the two interpolants: the
    descent-first one turns at the first value, the ascent-first one at
    the second.  Both lie inside the segment exactly when st1 holds."""
    m, n = spec.shape.m, spec.shape.n
    u = spec.t_start + Fraction(n, m + n) * (spec.dt + m * spec.deps)
    v = spec.t_start + Fraction(m, m + n) * (spec.dt - n * spec.deps)
    return u, v


class _PL1:
    """Scalar piecewise-linear function on [t0, t1], exact."""

    def __init__(self, breaks: list[Fraction], vals: list[Fraction]):
        # a switch time may coincide with an endpoint; drop the
        # zero-length segment (its values agree by construction)
        self.breaks, self.vals = [breaks[0]], [vals[0]]
        for b, v in zip(breaks[1:], vals[1:]):
            if b > self.breaks[-1]:
                self.breaks.append(b)
                self.vals.append(v)

    def __call__(self, t: Fraction) -> Fraction:
        bs, vs = self.breaks, self.vals
        for i in range(len(bs) - 1):
            if t <= bs[i + 1]:
                w = (t - bs[i]) / (bs[i + 1] - bs[i])
                return vs[i] + (vs[i + 1] - vs[i]) * w
        return vs[-1]


def build_segment(spec: SegmentSpec, *, strict: bool = True) -> Template:
    """Build the standard template on [t_start, t_end].

    With strict=True (default) an InfeasibleSpec is raised unless all
    three formulas pass, and the result is re-checked against the
    template axioms (a failure there would be a construction bug and
    raises MalformedTemplate).  strict=False builds through st2/st3
    failures so the degraded combinatorics can still be inspected; st1
    failures are never built through since the switch times leave the
    segment and the construction is geometrically meaningless.
    """
    shape = spec.shape
    m, n, d = shape.m, shape.n, shape.d
    report = feasibility(spec)
    if strict and not report.all_pass:
        raise InfeasibleSpec(report)
    if not report.st1_ok:
        raise InfeasibleSpec(report)
    if d < 3:
        raise DegenerateShape("(m, n) = (1, 1) admits no balancing component")

    t0, t1 = spec.t_start, spec.t_end
    e0, e1 = spec.eps_start, spec.eps_end
    u, v = switch_times(spec)
    down, up = Fraction(-1, n), Fraction(1, m)

    g1 = _PL1([t0, u, t1], [-e0, -e0 + down * (u - t0), -e1])
    g2 = _PL1([t0, v, t1], [-e0, -e0 + up * (v - t0), -e1])
    assert g1(t1) == -e1 and g2(t1) == -e1  # forced by the switch times

    def g3(t: Fraction) -> Fraction:
        return -(g1(t) + g2(t)) / (d - 2)

    breaks = sorted({t0, u, v, t1})
    # insert exact crossings of the balance test w = g2 - g3
    cuts = set(breaks)
    for a, b in zip(breaks, breaks[1:]):
        wa, wb = g2(a) - g3(a), g2(b) - g3(b)
        if (wa > 0 > wb) or (wa < 0 < wb):
            cuts.add(a + (b - a) * wa / (wa - wb))
    breaks = sorted(cuts)

    rows: list[tuple[Fraction, ...] | None] = [None] * len(breaks)
    for k in range(len(breaks) - 1):
        a, b = breaks[k], breaks[k + 1]
        mid = (a + b) / 2
        balanced = g2(mid) <= g3(mid)  # tangential contact keeps the balanced branch
        for idx, t in ((k, a), (k + 1, b)):
            if balanced:
                tail_val = g3(t)
                row = (g1(t), g2(t)) + (tail_val,) * (d - 2)
            else:
                lead = g1(t)
                row = (lead,) + (-lead / Fraction(d - 1),) * (d - 1)
            if rows[idx] is None:
                rows[idx] = row
            elif rows[idx] != row:
                raise MalformedTemplate(
                    f"branches disagree at t={t}: {rows[idx]} vs {row}"
                )

    template = Template(PiecewiseLinearPath(breaks, rows), shape)
    if strict:
        violations = validate_template(template)
        if violations:
            detail = "; ".join(str(v) for v in violations[:4])
            raise MalformedTemplate(f"feasible spec built an invalid template: {detail}")
    return template


def concat(segments, *, periodic_last: bool = False) -> Template:
    """Join segment templates end to end; exact endpoint agreement is
    required at every junction.  With periodic_last the final segment
    becomes the repeating motif of a periodic tail."""
    segments = list(segments)
    if not segments:
        raise ValueError("nothing to concatenate")
    shape = segments[0].shape
    if any(s.shape != shape for s in segments):
        raise ValueError("segments disagree on the flow shape")
    breaks = list(segments[0].path.breakpoints)
    rows = list(segments[0].path.values)
    for j, seg in enumerate(segments[1:], start=1):
        p = seg.path
        if p.breakpoints[0] != breaks[-1]:
            raise EndpointMismatch(
                j, p.breakpoints[0], f"starts at {p.breakpoints[0]}, expected {breaks[-1]}"
            )
        if p.values[0] != rows[-1]:
            raise EndpointMismatch(
                j, p.breakpoints[0], f"value jump {rows[-1]} -> {p.values[0]}"
            )
        breaks.extend(p.breakpoints[1:])
        rows.extend(p.values[1:])
    tail = None
    if periodic_last:
        motif = segments[-1].path
        period = motif.breakpoints[-1] - motif.breakpoints[0]
        offset = tuple(b - a for a, b in zip(motif.values[0], motif.values[-1]))
        tail = PeriodicTail(period, offset)
    return Template(PiecewiseLinearPath(breaks, rows, tail), shape)


def paper_template(
    shape: FlowShape,
    C,
    t,
    head_plus_one_period: bool = True,
    *,
    strict: bool = True,
) -> Template:
    """Head segment dropping from depth 0 to depth 2C over [0, t],
    followed by the constant-depth segment [t, 2t] repeating forever.

    The returned template's explicit window is [0, 2t]; with
    head_plus_one_period (default) the final segment is marked as the
    periodic motif, otherwise the template is finite.  Feasibility of
    head and repeat are checked separately so the error says which part
    failed; strict=False is forwarded to the segment builder.
    """
    C, t = _frac(C), _frac(t)
    if C < 0:
        raise ValueError("depth C must be nonnegative")
    if t <= 0:
        raise ValueError("segment length t must be positive")
    head_spec = SegmentSpec(shape, 0, 0, t, 2 * C)
    motif_spec = SegmentSpec(shape, t, 2 * C, 2 * t, 2 * C)
    if strict:
        for part, sp in (("head", head_spec), ("period", motif_spec)):
            rep = feasibility(sp)
            if not rep.all_pass:
                raise InfeasibleSpec(rep, part=part)
    head = build_segment(head_spec, strict=strict)
    motif = build_segment(motif_spec, strict=strict)
    return concat([head, motif], periodic_last=head_plus_one_period)
