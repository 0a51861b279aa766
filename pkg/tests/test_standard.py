from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latflow import (
    DegenerateShape,
    EndpointMismatch,
    FlowShape,
    InfeasibleSpec,
    SegmentSpec,
    average_contraction,
    build_segment,
    concat,
    feasibility,
    lower_average_contraction,
    paper_template,
    switch_times,
    validate_template,
)
from conftest import SHAPE21, random_feasible_spec

SHAPE11 = FlowShape(1, 1)


# ---------------------------------------------------------------------------
# feasibility


def test_zero_depth_spec_passes():
    rep = feasibility(SegmentSpec(SHAPE21, 0, 0, 1, 0))
    assert rep.all_pass
    assert rep.st1_margin == F(1, 2)
    assert rep.st2_margin == F(1, 4)
    assert rep.st3_margins[1] == F(1, 2)


def test_large_window_deep_spec_passes():
    rep = feasibility(SegmentSpec(SHAPE21, 0, 1, 100, 1))
    assert rep.all_pass
    assert rep.st3_margins[1] == 50 - 3  # (m-1)(dt/m) - d*eps_end


def test_one_one_constant_depth_fails_st3():
    rep = feasibility(SegmentSpec(SHAPE11, 0, 1, 10, 1))
    assert not rep.st3_ok
    assert rep.failures() == ["st3"]
    assert rep.st3_margins == (F(-2), F(-2))


def test_st2_binds_only_at_extremal_shapes():
    assert feasibility(SegmentSpec(FlowShape(2, 2), 0, 1, 4, 1)).st2_margin is None
    assert feasibility(SegmentSpec(SHAPE21, 0, 0, 1, 0)).st2_margin is not None


def test_spec_validation():
    with pytest.raises(ValueError):
        SegmentSpec(SHAPE21, 1, 0, 1, 0)  # zero length
    with pytest.raises(ValueError):
        SegmentSpec(SHAPE21, 0, -1, 1, 0)  # negative depth


def test_switch_times_unit_segment():
    assert switch_times(SegmentSpec(SHAPE21, 0, 0, 1, 0)) == (F(1, 3), F(2, 3))


@settings(max_examples=60, deadline=None)
@given(
    dt_num=st.integers(1, 64),
    e0_num=st.integers(0, 32),
    e1_num=st.integers(0, 32),
    m=st.integers(1, 3),
    n=st.integers(1, 3),
)
def test_switch_times_inside_segment_iff_st1(dt_num, e0_num, e1_num, m, n):
    spec = SegmentSpec(
        FlowShape(m, n), 0, F(e0_num, 8), F(dt_num, 8), F(e1_num, 8)
    )
    rep = feasibility(spec)
    u, v = switch_times(spec)
    inside = spec.t_start <= u <= spec.t_end and spec.t_start <= v <= spec.t_end
    assert inside == rep.st1_ok


# ---------------------------------------------------------------------------
# build_segment


def test_unit_segment_golden_values():
    tpl = build_segment(SegmentSpec(SHAPE21, 0, 0, 1, 0))
    path = tpl.path
    assert tuple(path.breakpoints) == (F(0), F(1, 3), F(2, 3), F(1))
    f1 = [row[0] for row in path.values]
    assert f1 == [F(0), F(-1, 3), F(-1, 6), F(0)]
    f2 = [row[1] for row in path.values]
    f3 = [row[2] for row in path.values]
    assert f2 == f3 == [F(0), F(1, 6), F(1, 12), F(0)]


def test_segment_rows_sum_to_zero():
    tpl = build_segment(SegmentSpec(SHAPE21, 0, F(1, 2), 30, F(1, 4)))
    for row in tpl.path.values:
        assert sum(row) == 0


def test_infeasible_strict_raises():
    spec = SegmentSpec(SHAPE21, 0, 2, 1, 2)  # st3 hopeless on a short window
    assert not feasibility(spec).all_pass
    with pytest.raises(InfeasibleSpec):
        build_segment(spec)


def test_non_strict_builds_through_st3():
    spec = SegmentSpec(SHAPE21, 0, 2, 1, 2)
    assert feasibility(spec).st1_ok
    tpl = build_segment(spec, strict=False)
    assert tpl.path.t_end == 1
    for row in tpl.path.values:
        assert sum(row) == 0


def test_st1_failure_never_builds():
    spec = SegmentSpec(SHAPE21, 0, 0, 1, 4)  # deps exceeds dt/n
    assert not feasibility(spec).st1_ok
    with pytest.raises(InfeasibleSpec):
        build_segment(spec, strict=False)


def test_one_one_shape_degenerate():
    with pytest.raises(DegenerateShape):
        build_segment(SegmentSpec(SHAPE11, 0, 0, 1, 0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shape_ix=st.integers(0, 3))
def test_random_feasible_specs_build_valid(seed, shape_ix):
    shape = [(2, 1), (1, 2), (2, 2), (3, 2)][shape_ix]
    rng = np.random.default_rng(seed)
    spec = random_feasible_spec(rng, FlowShape(*shape))
    tpl = build_segment(spec)
    assert validate_template(tpl) == []
    assert all(sum(row) == 0 for row in tpl.path.values)


@settings(max_examples=25, deadline=None)
@given(
    c_num=st.integers(0, 8),
    t_num=st.integers(1, 30),
    k=st.integers(0, 5),
)
def test_constant_depth_average_is_scale_invariant(c_num, t_num, k):
    # the window [kt, (k+1)t] at depth 2C averages like [0, 1] at depth 2C/t
    C, t = F(c_num, 4), F(t_num, 2)
    big = build_segment(
        SegmentSpec(SHAPE21, k * t, 2 * C, (k + 1) * t, 2 * C), strict=False
    )
    unit = build_segment(
        SegmentSpec(SHAPE21, 0, 2 * C / t, 1, 2 * C / t), strict=False
    )
    assert average_contraction(big, k * t, (k + 1) * t) == average_contraction(unit, 0, 1)


# ---------------------------------------------------------------------------
# concat


def test_concat_single_segment_identity():
    tpl = build_segment(SegmentSpec(SHAPE21, 0, 0, 1, 0))
    assert concat([tpl]).path == tpl.path


def test_concat_continuous_at_junction():
    head = build_segment(SegmentSpec(SHAPE21, 0, 0, 20, 2))
    motif = build_segment(SegmentSpec(SHAPE21, 20, 2, 40, 2))
    joined = concat([head, motif])
    assert joined.path.value(20) == head.path.value(20)
    assert joined.path.t_end == 40
    assert validate_template(joined) == []


def test_concat_mismatch_raises():
    head = build_segment(SegmentSpec(SHAPE21, 0, 0, 20, 2))
    other = build_segment(SegmentSpec(SHAPE21, 20, 3, 40, 3), strict=False)
    with pytest.raises(EndpointMismatch):
        concat([head, other])


def test_concat_periodic_last():
    head = build_segment(SegmentSpec(SHAPE21, 0, 0, 20, 2))
    motif = build_segment(SegmentSpec(SHAPE21, 20, 2, 40, 2))
    joined = concat([head, motif], periodic_last=True)
    assert joined.path.tail is not None
    assert joined.path.tail.period == 20
    assert joined.path.covers(1000)


# ---------------------------------------------------------------------------
# paper_template


def test_paper_template_zero_depth_exact_average():
    tpl = paper_template(SHAPE21, 0, 1)
    assert lower_average_contraction(tpl) == F(4, 3)


def test_paper_template_t100_value():
    tpl = paper_template(SHAPE21, 1, 100)
    val = lower_average_contraction(tpl)
    assert val == F(97, 75)
    assert F(4, 3) - F(10, 100) <= val <= F(4, 3)  # within K/t of the limit


def test_paper_template_one_one_infeasible():
    with pytest.raises(InfeasibleSpec) as exc:
        paper_template(SHAPE11, 1, 100)
    assert exc.value.part == "head"
    assert exc.value.report.failures() == ["st2"]


def test_paper_template_period_feasibility_threshold():
    # the constant-depth repeat needs a window of at least 12 C here
    with pytest.raises(InfeasibleSpec) as exc:
        paper_template(SHAPE21, 1, 11)
    assert exc.value.part == "period"
    assert exc.value.report.failures() == ["st3"]
    tpl = paper_template(SHAPE21, 1, 12)
    assert validate_template(tpl) == []


def test_paper_template_non_strict_builds_degraded():
    tpl = paper_template(SHAPE21, 1, 10, strict=False)
    violations = validate_template(tpl)
    assert len(violations) == 3
    assert {v.axiom for v in violations} == {"block-convexity"}
    # the period average still computes exactly
    assert lower_average_contraction(tpl) == 1


def test_paper_template_finite_variant():
    tpl = paper_template(SHAPE21, 1, 100, head_plus_one_period=False)
    assert tpl.path.tail is None
    assert tpl.path.t_end == 200


def test_paper_template_rejects_bad_params():
    with pytest.raises(ValueError):
        paper_template(SHAPE21, -1, 10)
    with pytest.raises(ValueError):
        paper_template(SHAPE21, 1, 0)
