"""End-to-end command tests driving latflow.cli.main with argv lists."""

import math

import pytest

from latflow import FlowShape, SegmentSpec, build_segment, template_to_text, zero_template
from latflow.cli import main

from conftest import SHAPE21

BAD_SLOPE_TEMPLATE = """\
template d=3 m=2 n=1 tail=finite
t=0 v=0,0,0
t=1 v=-2,1,1
"""

GOLDEN_INI = """\
[shape]
m = 2
n = 1

[band]
rho = 0.01
eta = 0.999
t_start = 2.0
horizon = 6.0
grid_step = 0.25

[scan]
resolution = 8

[experiment]
n_min = 1
n_max = 4
epsilon = 0.1

[labeler]
cell = 0.05
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# ---------------------------------------------------------------------------
# validate


def test_validate_accepts_zero_template(tmp_path, capsys):
    f = write(tmp_path, "zero.tpl", template_to_text(zero_template(SHAPE21, 2)))
    assert main(["validate", f]) == 0
    assert capsys.readouterr().out.strip() == "valid"


def test_validate_reports_slope_violations(tmp_path, capsys):
    f = write(tmp_path, "bad.tpl", BAD_SLOPE_TEMPLATE)
    assert main(["validate", f]) == 1
    out = capsys.readouterr().out
    assert "slope-range" in out
    assert "component" in out


def test_validate_empty_file_is_a_parse_error(tmp_path, capsys):
    f = write(tmp_path, "empty.tpl", "")
    assert main(["validate", f]) == 2
    assert "parse error at line 1" in capsys.readouterr().err


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.tpl")]) == 2
    assert "cannot read" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# delta


def test_delta_zero_template_prints_exact_rational(tmp_path, capsys):
    f = write(tmp_path, "zero.tpl", template_to_text(zero_template(SHAPE21, 2)))
    assert main(["delta", f]) == 0
    assert capsys.readouterr().out.strip() == "2/1 = 2"


def test_delta_window_on_unit_segment(tmp_path, capsys):
    seg = build_segment(SegmentSpec(SHAPE21, 0, 0, 1, 0))
    f = write(tmp_path, "seg.tpl", template_to_text(seg))
    assert main(["delta", f, "--window", "0", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("4/3 = 1.333333")


def test_delta_paper_template_long_period(tmp_path, capsys):
    rc = main(["paper-template", "--m", "2", "--n", "1", "--C", "1", "--t", "100",
               "-o", str(tmp_path / "paper.tpl")])
    assert rc == 0
    assert main(["delta", str(tmp_path / "paper.tpl")]) == 0
    assert capsys.readouterr().out.strip().startswith("97/75 = 1.29333")


def test_delta_finite_template_has_no_period_average(tmp_path, capsys):
    seg = build_segment(SegmentSpec(SHAPE21, 0, 0, 1, 0))
    f = write(tmp_path, "seg.tpl", template_to_text(seg))
    assert main(["delta", f]) == 1
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# standard / paper-template


def test_standard_writes_valid_template(tmp_path, capsys):
    out = tmp_path / "seg.tpl"
    rc = main(["standard", "--m", "2", "--n", "1", "--t-start", "0",
               "--eps-start", "0", "--t-end", "1", "--eps-end", "0",
               "-o", str(out)])
    assert rc == 0
    assert out.read_text().startswith("template d=3 m=2 n=1 tail=finite")
    assert main(["validate", str(out)]) == 0


def test_standard_degenerate_shape_fails(capsys):
    rc = main(["standard", "--m", "1", "--n", "1", "--t-start", "0",
               "--eps-start", "0", "--t-end", "1", "--eps-end", "0"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_standard_no_strict_builds_through_infeasibility(tmp_path, capsys):
    # deep endpoints over a short window fail the third feasibility check
    args = ["standard", "--m", "2", "--n", "1", "--t-start", "0",
            "--eps-start", "2", "--t-end", "1", "--eps-end", "2"]
    assert main(args + ["-o", str(tmp_path / "a.tpl")]) == 1
    assert main(args + ["--no-strict", "-o", str(tmp_path / "b.tpl")]) == 0
    assert (tmp_path / "b.tpl").exists() and not (tmp_path / "a.tpl").exists()


def test_paper_template_strict_threshold(tmp_path, capsys):
    base = ["paper-template", "--m", "2", "--n", "1", "--C", "1", "--t", "10"]
    assert main(base + ["-o", str(tmp_path / "x.tpl")]) == 1
    assert "error:" in capsys.readouterr().err
    assert main(base + ["--no-strict", "-o", str(tmp_path / "x.tpl")]) == 0
    assert (tmp_path / "x.tpl").read_text().startswith("template d=3")


def test_paper_template_writes_to_stdout_without_output_flag(capsys):
    rc = main(["paper-template", "--m", "2", "--n", "1", "--C", "0", "--t", "1"])
    assert rc == 0
    assert capsys.readouterr().out.startswith("template d=3 m=2 n=1 tail=periodic:1")


# ---------------------------------------------------------------------------
# simulate


def test_simulate_zero_perturbation_golden(tmp_path, capsys):
    rc = main(["simulate", "--m", "2", "--n", "1", "--A", "0,0",
               "--t-start", "0", "--horizon", "2", "--grid-step", "1",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert f"wrote {tmp_path}/minima.csv and {tmp_path}/minima.svg" in out

    lines = (tmp_path / "minima.csv").read_text().splitlines()
    assert lines[0].startswith("# config ")
    assert lines[1] == "t,h1,h2,h3"
    rows = [[float(x) for x in ln.split(",")] for ln in lines[2:]]
    assert rows[0] == [0.0, 0.0, 0.0, 0.0]
    assert rows[2][0] == 2.0
    assert rows[2][1:] == pytest.approx([-2.0, 1.0, 1.0], rel=1e-12)

    svg = (tmp_path / "minima.svg").read_text()
    assert svg.startswith("<svg") or "<svg" in svg
    assert 'fill="white"' in svg
    assert "log min 3" in svg
    assert "5,4" not in svg


def test_simulate_with_template_overlay(tmp_path, capsys):
    tpl = write(tmp_path, "zero.tpl", template_to_text(zero_template(SHAPE21, 2)))
    rc = main(["simulate", "--m", "2", "--n", "1", "--A", "0,0",
               "--t-start", "0", "--horizon", "2", "--grid-step", "1",
               "--template", tpl, "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "sup deviation 2" in out
    svg = (tmp_path / "minima.svg").read_text()
    assert "5,4" in svg
    assert "sup deviation = 2" in svg


def test_simulate_rejects_wrong_perturbation_length(tmp_path, capsys):
    rc = main(["simulate", "--m", "2", "--n", "1", "--A", "0,0,0",
               "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "needs 2 entries" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# band-scan


def test_band_scan_default_band_is_empty_at_resolution_one(tmp_path, capsys):
    rc = main(["band-scan", "--resolution", "1", "--out-dir", str(tmp_path)])
    assert rc == 0
    cap = capsys.readouterr()
    assert cap.out.strip() == "0 survivors at resolution 1"
    assert "warning:" in cap.err and "no grid point survives" in cap.err
    lines = (tmp_path / "survivors.csv").read_text().splitlines()
    assert lines[0].startswith("# config ")
    assert lines[1] == "a11,a21"
    assert len(lines) == 2


def test_band_scan_flags_override_config_file(tmp_path, capsys):
    cfg = write(tmp_path, "scan.ini", "[scan]\nresolution = 4\n")
    rc = main(["band-scan", "--config", cfg, "--resolution", "1",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    assert "at resolution 1" in capsys.readouterr().out


def test_band_scan_config_file_applies_when_no_flag(tmp_path, capsys):
    cfg = write(tmp_path, "scan.ini", "[scan]\nresolution = 4\n")
    rc = main(["band-scan", "--config", cfg, "--out-dir", str(tmp_path)])
    assert rc == 0
    assert "at resolution 4" in capsys.readouterr().out


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    cfg = write(tmp_path, "scan.ini", "[scan]\nresolutionn = 4\n")
    rc = main(["band-scan", "--config", cfg, "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "config error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# dim-experiment


def test_dim_experiment_golden_counts(tmp_path, capsys):
    cfg = write(tmp_path, "exp.ini", GOLDEN_INI)
    rc = main(["dim-experiment", "--config", cfg, "--out-dir", str(tmp_path)])
    assert rc == 0
    assert "(desk-scale estimate)" in capsys.readouterr().out
    lines = (tmp_path / "dimension.csv").read_text().splitlines()
    assert lines[1] == "N,count,estimate,target"
    rows = [ln.split(",") for ln in lines[2:]]
    assert [(int(r[0]), int(r[1])) for r in rows] == [(1, 16), (2, 48), (3, 48), (4, 48)]
    rate = SHAPE21.expansion_rate()
    for r in rows:
        n, count = int(r[0]), int(r[1])
        assert float(r[2]) == pytest.approx(math.log(count) / (rate * n), rel=1e-10)
        assert float(r[3]) == pytest.approx(2 - 2 / 3 - 0.1, rel=1e-10)


def test_dim_experiment_reruns_byte_identical(tmp_path):
    cfg = write(tmp_path, "exp.ini", GOLDEN_INI)
    base = ["dim-experiment", "--config", cfg, "--out-dir", str(tmp_path)]
    assert main(base + ["--out-csv", "run1.csv"]) == 0
    assert main(base + ["--out-csv", "run2.csv"]) == 0
    assert (tmp_path / "run1.csv").read_bytes() == (tmp_path / "run2.csv").read_bytes()


def test_dim_experiment_desk_scale_cap(tmp_path, capsys):
    cfg = write(tmp_path, "exp.ini", GOLDEN_INI)
    rc = main(["dim-experiment", "--config", cfg, "--n-max", "99",
               "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "exceeds the desk-scale cap" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# entropy-experiment


def test_entropy_experiment_slack_grid(tmp_path, capsys):
    cfg = write(tmp_path, "exp.ini", GOLDEN_INI)
    rc = main(["entropy-experiment", "--config", cfg, "--n-min", "2",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "entropy.csv").read_text().splitlines()
    assert lines[1] == "quantity,value,bound,slack"
    rows = [ln.split(",") for ln in lines[2:]]
    assert [r[0] for r in rows] == [
        "entropy_avg_N2_q1", "entropy_avg_N2_q2",
        "entropy_avg_N3_q1", "entropy_avg_N3_q2", "entropy_avg_N3_q3",
        "entropy_avg_N4_q1", "entropy_avg_N4_q2", "entropy_avg_N4_q3", "entropy_avg_N4_q4",
    ]
    assert all(float(r[3]) > 0 for r in rows)


def test_entropy_experiment_with_empty_scan_writes_nothing(tmp_path, capsys):
    rc = main(["entropy-experiment", "--resolution", "1", "--out-dir", str(tmp_path)])
    assert rc == 0
    assert "nothing to measure; no CSV written" in capsys.readouterr().err
    assert not (tmp_path / "entropy.csv").exists()


# ---------------------------------------------------------------------------
# mixture


def test_mixture_midpoint_ledger(capsys):
    assert main(["mixture", "--m", "2", "--n", "1", "--h", "2.5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == [
        "uniform_weight 0.5",
        "escape_weight 0.5",
        "uniform_entropy 3",
        "ledger_entropy 2.5",
    ]


def test_mixture_rejects_out_of_range_entropy(capsys):
    assert main(["mixture", "--m", "2", "--n", "1", "--h", "3.5"]) == 1
    assert "error:" in capsys.readouterr().err
