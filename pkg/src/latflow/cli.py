"""Command-line workbench: template validation and contraction
averages, standard-construction builders, flow simulation with SVG
plots, torus scans, and the dimension / entropy experiment pipelines.

Config precedence is fixed: built-in defaults, then the --config file,
then explicit flags.  Every CSV artifact starts with a comment line
carrying a hash of the fully resolved configuration, so outputs are
traceable to their inputs and reruns are byte-comparable.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import sys
import warnings
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .experiments import (
    BandSpec,
    dimension_estimate,
    greedy_separated_set,
    matrices_to_csv,
    scan_band_matrices,
    sup_deviation,
)
from .lattice import (
    DEFAULT_ENUM_BUDGET,
    EnumerationBudgetExceeded,
    FlowShape,
    PerturbationMatrix,
    minima_path,
    minima_path_to_csv,
)
from .measures import (
    EmptySet,
    GridLabeler,
    InvalidParams,
    OutOfRange,
    entropy_inequality_check,
    haar_entropy,
    mixture_entropy,
    mixture_weights,
    nu_N,
)
from .standard import (
    DegenerateShape,
    EndpointMismatch,
    InfeasibleSpec,
    SegmentSpec,
    build_segment,
    paper_template,
)
from .templates import (
    DomainMismatch,
    MalformedTemplate,
    NotEventuallyPeriodic,
    Template,
    TemplateParseError,
    average_contraction,
    lower_average_contraction,
    template_from_text,
    template_to_text,
    validate_template,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3

_DOMAIN_ERRORS = (
    MalformedTemplate,
    NotEventuallyPeriodic,
    DomainMismatch,
    InfeasibleSpec,
    DegenerateShape,
    EndpointMismatch,
    EmptySet,
    InvalidParams,
    OutOfRange,
    ValueError,
)


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    m: int = 2
    n: int = 1
    rho: float = 0.05
    eta: float = 0.5
    t_start: float = 0.0
    horizon: float = 8.0
    grid_step: float = 0.25
    C: Fraction = Fraction(1)
    t: Fraction = Fraction(100)
    periods: int = 1
    resolution: int = 16
    workers: int = 1
    budget: int = DEFAULT_ENUM_BUDGET
    n_min: int = 1
    n_max: int = 4
    desk_max_n: int = 5
    epsilon: float = 0.1
    cell: float = 0.05
    seed: int = 0
    out_dir: str = "."

    @property
    def shape(self) -> FlowShape:
        return FlowShape(self.m, self.n)

    def band(self) -> BandSpec:
        return BandSpec(
            rho=self.rho,
            eta=self.eta,
            t_start=self.t_start,
            horizon=self.horizon,
            grid_step=self.grid_step,
        )

    def hash(self) -> str:
        text = ";".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


# (section, key) -> (field, parser).  Sections group by the module the
# knob belongs to; the flat key=value lines stay diff-friendly.
_CONFIG_KEYS = {
    ("shape", "m"): ("m", int),
    ("shape", "n"): ("n", int),
    ("band", "rho"): ("rho", float),
    ("band", "eta"): ("eta", float),
    ("band", "t_start"): ("t_start", float),
    ("band", "horizon"): ("horizon", float),
    ("band", "grid_step"): ("grid_step", float),
    ("template", "c"): ("C", Fraction),
    ("template", "t"): ("t", Fraction),
    ("template", "periods"): ("periods", int),
    ("scan", "resolution"): ("resolution", int),
    ("scan", "workers"): ("workers", int),
    ("scan", "budget"): ("budget", int),
    ("experiment", "n_min"): ("n_min", int),
    ("experiment", "n_max"): ("n_max", int),
    ("experiment", "desk_max_n"): ("desk_max_n", int),
    ("experiment", "epsilon"): ("epsilon", float),
    ("experiment", "seed"): ("seed", int),
    ("experiment", "out_dir"): ("out_dir", str),
    ("labeler", "cell"): ("cell", float),
}


def load_config(path: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except configparser.Error as e:
        raise ConfigError(f"bad config {path}: {e}") from None
    out = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            spec = _CONFIG_KEYS.get((section.lower(), key.lower()))
            if spec is None:
                raise ConfigError(f"unknown config entry [{section}] {key}")
            field, parse = spec
            try:
                out[field] = parse(raw)
            except (ValueError, ZeroDivisionError) as e:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({e})") from None
    return out


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **load_config(args.config))
    overrides = {}
    for f in fields(ExperimentConfig):
        val = getattr(args, f"cfg_{f.name}", None)
        if val is not None:
            overrides[f.name] = val
    return replace(cfg, **overrides)


def _add_config_flags(sub, *names):
    sub.add_argument("--config", metavar="FILE", help="INI config file; flags win over it")
    defaults = {f.name: f.default for f in fields(ExperimentConfig)}
    for name in names:
        typ = type(defaults[name])  # int, float, Fraction, or str; all parse a string
        flag = "--" + name.replace("_", "-")
        sub.add_argument(flag, dest=f"cfg_{name}", type=typ, default=None, metavar=name.upper())


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _csv_with_hash(cfg_hash: str, body: str) -> str:
    return f"# config {cfg_hash}\n{body}"


def _fmt_fraction(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    try:
        text = Path(args.file).read_text()
    except OSError as e:
        print(f"cannot read {args.file}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    tpl = template_from_text(text)
    violations = validate_template(tpl)
    for v in violations:
        lo, hi = v.interval
        print(f"{v.axiom}: component {v.index}, interval [{lo}, {hi}]: {v.message}")
    if violations:
        return EXIT_DOMAIN
    print("valid")
    return EXIT_OK


def cmd_delta(args) -> int:
    tpl = template_from_text(Path(args.file).read_text())
    if args.window is not None:
        lo, hi = args.window
        value = average_contraction(tpl, lo, hi)
    else:
        value = lower_average_contraction(tpl)
    print(f"{_fmt_fraction(value)} = {float(value):.12g}")
    return EXIT_OK


def cmd_standard(args) -> int:
    spec = SegmentSpec(
        FlowShape(args.m, args.n),
        t_start=args.t_start,
        eps_start=args.eps_start,
        t_end=args.t_end,
        eps_end=args.eps_end,
    )
    tpl = build_segment(spec, strict=not args.no_strict)
    text = template_to_text(tpl)
    if args.output:
        _write_text(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_paper_template(args) -> int:
    cfg = resolve_config(args)
    tpl = paper_template(cfg.shape, cfg.C, cfg.t, strict=not args.no_strict)
    text = template_to_text(tpl)
    if args.output:
        _write_text(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _grid_times(t_start: float, horizon: float, step: float) -> list[float]:
    count = int(math.floor((horizon - t_start) / step + 1e-12)) + 1
    return [t_start + k * step for k in range(count)]


def _float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",")]


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    shape = cfg.shape
    if len(args.A) != shape.m * shape.n:
        raise ConfigError(
            f"A needs {shape.m * shape.n} entries for shape ({shape.m},{shape.n}), got {len(args.A)}"
        )
    A = PerturbationMatrix.from_flat(shape, args.A)
    times = _grid_times(cfg.t_start, cfg.horizon, cfg.grid_step)
    path = minima_path(shape, A, times, budget=cfg.budget)

    overlay = None
    deviation = None
    if args.template:
        overlay = template_from_text(Path(args.template).read_text())
        deviation = sup_deviation(path, overlay)

    out = Path(cfg.out_dir)
    csv_text = _csv_with_hash(cfg.hash(), minima_path_to_csv(path))
    _write_text(out / args.out_csv, csv_text)
    svg = minima_svg(path, overlay, deviation)
    _write_text(out / args.out_svg, svg)
    if deviation is not None:
        print(f"sup deviation {deviation:.12g}")
    print(f"wrote {out / args.out_csv} and {out / args.out_svg}")
    return EXIT_OK


def cmd_band_scan(args) -> int:
    cfg = resolve_config(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        survivors = scan_band_matrices(
            cfg.shape, cfg.band(), cfg.resolution, workers=cfg.workers, budget=cfg.budget
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    body = matrices_to_csv(survivors, cfg.shape)
    _write_text(Path(cfg.out_dir) / args.out_csv, _csv_with_hash(cfg.hash(), body))
    print(f"{len(survivors)} survivors at resolution {cfg.resolution}")
    return EXIT_OK


def cmd_dim_experiment(args) -> int:
    cfg = resolve_config(args)
    if not (1 <= cfg.n_min <= cfg.n_max):
        raise ConfigError(f"need 1 <= n_min <= n_max, got {cfg.n_min}..{cfg.n_max}")
    if cfg.n_max > cfg.desk_max_n:
        raise ConfigError(
            f"n_max {cfg.n_max} exceeds the desk-scale cap {cfg.desk_max_n}; "
            "raise desk_max_n deliberately if you mean it"
        )
    shape = cfg.shape
    rate = shape.expansion_rate()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        survivors = scan_band_matrices(
            shape, cfg.band(), cfg.resolution, workers=cfg.workers, budget=cfg.budget
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    target = shape.m * shape.n - shape.m * shape.n / shape.d - cfg.epsilon
    rows = []
    for N in range(cfg.n_min, cfg.n_max + 1):
        sep = math.exp(-rate * N)
        kept = greedy_separated_set(survivors, sep, level=N) if survivors else []
        count = len(kept)
        est = f"{dimension_estimate(count, N, shape):.12g}" if count >= 1 else "nan"
        rows.append(f"{N},{count},{est},{target:.12g}")
    body = "N,count,estimate,target\n" + "\n".join(rows) + "\n"
    out = Path(cfg.out_dir) / args.out_csv
    _write_text(out, _csv_with_hash(cfg.hash(), body))
    print(f"wrote {out} (desk-scale estimate)")
    return EXIT_OK


def cmd_entropy_experiment(args) -> int:
    cfg = resolve_config(args)
    if not (1 <= cfg.n_min <= cfg.n_max):
        raise ConfigError(f"need 1 <= n_min <= n_max, got {cfg.n_min}..{cfg.n_max}")
    shape = cfg.shape
    band = cfg.band()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        survivors = scan_band_matrices(
            shape, band, cfg.resolution, workers=cfg.workers, budget=cfg.budget
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if not survivors:
        print("nothing to measure; no CSV written", file=sys.stderr)
        return EXIT_OK

    labeler = GridLabeler.for_band(shape, band, cfg.cell, budget=cfg.budget)
    rate = shape.expansion_rate()
    rows = []
    failed = False
    for N in range(cfg.n_min, cfg.n_max + 1):
        S = greedy_separated_set(survivors, math.exp(-rate * N), level=N)
        nu = nu_N(shape, S)
        for q in range(1, N + 1):
            rep = entropy_inequality_check(shape, nu, N, q, labeler)
            rows.append(
                f"entropy_avg_N{N}_q{q},{rep.lhs:.12g},{rep.rhs:.12g},{rep.slack:.12g}"
            )
            if rep.slack < -1e-9:
                failed = True
    body = "quantity,value,bound,slack\n" + "\n".join(rows) + "\n"
    out = Path(cfg.out_dir) / args.out_csv
    _write_text(out, _csv_with_hash(cfg.hash(), body))
    print(f"wrote {out}")
    if failed:
        print("entropy inequality violated beyond tolerance", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_mixture(args) -> int:
    shape = FlowShape(args.m, args.n)
    hw, cw = mixture_weights(args.h, shape)
    ledger = mixture_entropy(args.h, shape, args.cusp_entropy)
    print(f"uniform_weight {hw:.12g}")
    print(f"escape_weight {cw:.12g}")
    print(f"uniform_entropy {haar_entropy(shape):.12g}")
    print(f"ledger_entropy {ledger:.12g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# SVG

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _overlay_polylines(template: Template, t0: float, t1: float):
    """Exact polyline nodes for the template over [t0, t1]: window ends
    plus every breakpoint inside, motif unrolled as far as needed."""
    path = template.path
    work = path if path.is_finite else path.materialized(t1)
    ts = [Fraction(t0)] if work.covers(Fraction(t0)) else [work.t_start]
    hi = Fraction(t1) if work.covers(Fraction(t1)) else work.t_end
    for b in work.breakpoints:
        if ts[0] < b < hi:
            ts.append(b)
    ts.append(hi)
    vals = [work.value(t) for t in ts]
    return [float(t) for t in ts], [[float(v[i]) for v in vals] for i in range(template.shape.d)]


def minima_svg(path, template=None, deviation=None) -> str:
    """Static plot of the component logs over time, one polyline per
    component, optional dashed template overlay.  Pure string assembly
    with fixed formatting, so identical inputs give identical bytes."""
    W, H = 800, 500
    ml, mr, mt, mb = 60.0, 20.0, 20.0, 45.0
    ts = [float(t) for t in path.times]
    t0, t1 = ts[0], ts[-1]
    ys = [float(v) for row in path.logs for v in row]
    over = None
    if template is not None:
        over = _overlay_polylines(template, t0, t1)
        ys += [v for comp in over[1] for v in comp]
    ylo, yhi = min(ys), max(ys)
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    span_t = t1 - t0 if t1 > t0 else 1.0

    def X(t):
        return ml + (t - t0) / span_t * (W - ml - mr)

    def Y(v):
        return H - mb - (v - ylo) / (yhi - ylo) * (H - mt - mb)

    def poly(xs, vs, color, dash=""):
        pts = " ".join(f"{X(x):.3f},{Y(v):.3f}" for x, v in zip(xs, vs))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} points="{pts}"/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{ml}" y1="{H - mb}" x2="{W - mr}" y2="{H - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H - mb}" stroke="black"/>',
    ]
    for k in range(5):
        tv = t0 + span_t * k / 4
        vv = ylo + (yhi - ylo) * k / 4
        parts.append(
            f'<text x="{X(tv):.3f}" y="{H - mb + 18:.3f}" font-size="11" text-anchor="middle">{tv:.4g}</text>'
        )
        parts.append(
            f'<text x="{ml - 6:.3f}" y="{Y(vv) + 4:.3f}" font-size="11" text-anchor="end">{vv:.4g}</text>'
        )
    parts.append(
        f'<text x="{(ml + W - mr) / 2:.3f}" y="{H - 8}" font-size="12" text-anchor="middle">t</text>'
    )
    d = path.shape.d
    for i in range(d):
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(poly(ts, [float(row[i]) for row in path.logs], color))
        parts.append(
            f'<text x="{W - mr - 4}" y="{Y(float(path.logs[-1][i])) - 4:.3f}" font-size="11" '
            f'text-anchor="end" fill="{color}">log min {i + 1}</text>'
        )
    if over is not None:
        oxs, ocomps = over
        for i, comp in enumerate(ocomps):
            parts.append(poly(oxs, comp, _PALETTE[i % len(_PALETTE)], dash="5,4"))
    if deviation is not None:
        parts.append(
            f'<text x="{ml + 8}" y="{mt + 14}" font-size="12">sup deviation = {deviation:.6g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="latflow",
        description="Workbench for diagonal-flow minima paths, exact templates, and entropy experiments.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a template file against the path axioms")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)

    dl = sub.add_parser("delta", help="average contraction of a template, exact rational")
    dl.add_argument("file")
    dl.add_argument(
        "--window", nargs=2, type=Fraction, metavar=("LO", "HI"),
        help="average over [LO, HI] instead of the period",
    )
    dl.set_defaults(func=cmd_delta)

    st = sub.add_parser("standard", help="build one standard segment between two endpoint gaps")
    st.add_argument("--m", type=int, required=True)
    st.add_argument("--n", type=int, required=True)
    st.add_argument("--t-start", type=Fraction, required=True)
    st.add_argument("--eps-start", type=Fraction, required=True)
    st.add_argument("--t-end", type=Fraction, required=True)
    st.add_argument("--eps-end", type=Fraction, required=True)
    st.add_argument("--no-strict", action="store_true", help="build even if feasibility fails")
    st.add_argument("-o", "--output")
    st.set_defaults(func=cmd_standard)

    pt = sub.add_parser("paper-template", help="head plus periodic motif at depth C and period t")
    _add_config_flags(pt, "m", "n", "C", "t")
    pt.add_argument("--no-strict", action="store_true")
    pt.add_argument("-o", "--output")
    pt.set_defaults(func=cmd_paper_template)

    sim = sub.add_parser("simulate", help="minima path of one perturbation, CSV + SVG")
    _add_config_flags(sim, "m", "n", "t_start", "horizon", "grid_step", "budget", "out_dir")
    sim.add_argument(
        "--A", required=True, type=_float_list,
        help="comma-separated perturbation entries, row-major",
    )
    sim.add_argument("--template", help="template file to overlay")
    sim.add_argument("--out-csv", default="minima.csv")
    sim.add_argument("--out-svg", default="minima.svg")
    sim.set_defaults(func=cmd_simulate)

    bs = sub.add_parser("band-scan", help="grid-scan the torus for band-surviving perturbations")
    _add_config_flags(
        bs, "m", "n", "rho", "eta", "t_start", "horizon", "grid_step",
        "resolution", "workers", "budget", "out_dir",
    )
    bs.add_argument("--out-csv", default="survivors.csv")
    bs.set_defaults(func=cmd_band_scan)

    de = sub.add_parser("dim-experiment", help="scan, separate, estimate: N,count,estimate,target")
    _add_config_flags(
        de, "m", "n", "rho", "eta", "t_start", "horizon", "grid_step",
        "resolution", "workers", "budget", "n_min", "n_max", "desk_max_n",
        "epsilon", "seed", "out_dir",
    )
    de.add_argument("--out-csv", default="dimension.csv")
    de.set_defaults(func=cmd_dim_experiment)

    ee = sub.add_parser("entropy-experiment", help="inequality slacks over the (N, q) grid")
    _add_config_flags(
        ee, "m", "n", "rho", "eta", "t_start", "horizon", "grid_step",
        "resolution", "workers", "budget", "n_min", "n_max", "cell", "seed", "out_dir",
    )
    ee.add_argument("--out-csv", default="entropy.csv")
    ee.set_defaults(func=cmd_entropy_experiment)

    mx = sub.add_parser("mixture", help="entropy ledger for the uniform/escape mixture")
    mx.add_argument("--m", type=int, required=True)
    mx.add_argument("--n", type=int, required=True)
    mx.add_argument("--h", type=float, required=True)
    mx.add_argument("--cusp-entropy", type=float, default=None)
    mx.set_defaults(func=cmd_mixture)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TemplateParseError as e:
        print(f"parse error at line {e.line}: {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except EnumerationBudgetExceeded as e:
        print(f"enumeration budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except _DOMAIN_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
