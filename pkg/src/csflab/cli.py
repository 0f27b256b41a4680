"""Command line: ``csflab evolve | measure | verify | rescale | report``.

Every command reads its parameters into a :class:`~csflab.config.RunConfig`
(defaults, then ``--config FILE``, then flags) and stamps the config hash
into each file it writes.  Invalid input exits with status 2 before any
file is written; a failing verification exits with status 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import analyzers as an
from .catalog import AnalyticFlow, curve_from_name, flow_from_name, parse_catalog_name
from .config import RunConfig, load_config
from .curve import DiscreteCurve, InvalidCurveError, compute_geometry, load_curve
from .flow import (EvolveControls, FlowHistory, SolverError, StabilityError, evolve,
                   rescale_history)
from .functionals import (EntropyConfig, count_angle_preimages, entropy_bound_log_spiral,
                          entropy_bound_slope, entropy_bound_total_curvature, entropy_estimate,
                          integer_entropy, total_curvature, total_curvature_area_formula,
                          weighted_integral)

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_ERROR = 0, 1, 2, 3

# Gaussian mass beyond sqrt(160 lambda) sits past the truncation exponent
_GAUSS_REACH = math.sqrt(4.0 * 40.0)


class InvalidInput(ValueError):
    pass


# -- input resolution ---------------------------------------------------------------

def _is_file(text: str) -> bool:
    return bool(text) and Path(text).is_file()


def resolve_curve(cfg: RunConfig) -> DiscreteCurve:
    try:
        if _is_file(cfg.input):
            return load_curve(cfg.input)
        return curve_from_name(cfg.input)
    except (InvalidCurveError, ValueError, KeyError) as exc:
        raise InvalidInput(str(exc)) from exc


def resolve_flow(cfg: RunConfig) -> AnalyticFlow | None:
    if _is_file(cfg.input):
        return None
    try:
        return flow_from_name(cfg.input)
    except ValueError:
        return None


def _default_window(flow: AnalyticFlow, cfg: RunConfig) -> tuple[float, float]:
    hi = flow.valid_time[1]
    t_stop = cfg.t_stop if cfg.t_stop is not None else (min(1.0, hi - 0.1) if math.isfinite(hi) else 1.0)
    t_start = cfg.t_start if cfg.t_start is not None else t_stop - 3.0
    if not t_start < t_stop:
        raise InvalidInput("t_start must be below t_stop")
    return t_start, t_stop


def _analytic_slice(flow: AnalyticFlow, t: float, reach: float, spacing: float, n: int) -> DiscreteCurve:
    if flow.topology.value == "closed":
        return flow.curve(t, params=flow.uniform_params(t, n))
    return flow.window_curve(t, reach, spacing)


def analytic_verify_history(flow: AnalyticFlow, cfg: RunConfig) -> tuple[FlowHistory, float]:
    """Slices on ``[t_start, t_stop]`` wide enough for every Gaussian used later."""
    t_start, t_stop = _default_window(flow, cfg)
    t0 = cfg.t0 if cfg.t0 is not None else t_stop + 0.1
    times = np.linspace(t_start, t_stop, cfg.n_times)
    reach = max(_GAUSS_REACH * math.sqrt(max(t0 - t_start, 0.0)), cfg.center_box + 5.0)
    reach += float(np.hypot(*cfg.x0)) + float(np.hypot(*cfg.center))
    try:
        slices = tuple(_analytic_slice(flow, float(t), reach, cfg.spacing, cfg.n_samples) for t in times)
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc
    return FlowHistory(times, slices, {"source": flow.name}), t0


def load_history(cfg: RunConfig) -> tuple[FlowHistory, AnalyticFlow | None, float]:
    """History from a JSONL file or an analytic catalog flow, and the origin time."""
    flow = resolve_flow(cfg)
    if flow is not None:
        hist, t0 = analytic_verify_history(flow, cfg)
        return hist, flow, t0
    if not _is_file(cfg.input):
        raise InvalidInput(f"{cfg.input!r} is neither a history file nor an analytic flow")
    try:
        hist = FlowHistory.load(cfg.input)
    except (InvalidCurveError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InvalidInput(str(exc)) from exc
    t0 = cfg.t0 if cfg.t0 is not None else float(hist.times[-1]) + 0.1
    return hist, None, t0


# -- output helpers -------------------------------------------------------------------

def _out(cfg: RunConfig, name: str) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _dump(data: dict) -> str:
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in r])
    return buf.getvalue()


def svg_polylines(curves: list[np.ndarray], closed: list[bool], config_hash: str,
                  box: tuple[float, float, float, float] | None = None, size: int = 480) -> str:
    """Plain SVG with one polyline per curve; ``box`` is ``(xmin, ymin, xmax, ymax)``."""
    if box is None:
        allp = np.vstack(curves)
        lo, hi = allp.min(axis=0), allp.max(axis=0)
        pad = 0.05 * float(max(hi - lo)) or 1.0
        box = (lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)
    x0, y0, x1, y1 = box
    scale = size / max(x1 - x0, y1 - y0)
    w, h = (x1 - x0) * scale, (y1 - y0) * scale
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f"<!-- config_hash: {config_hash} -->",
             f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" '
             f'viewBox="0 0 {w:.1f} {h:.1f}">',
             f'<rect width="{w:.1f}" height="{h:.1f}" fill="white"/>']
    n = len(curves)
    for k, (p, is_closed) in enumerate(zip(curves, closed)):
        shade = int(200 * (1 - k / max(n - 1, 1)))
        color = f"rgb({shade},{shade},255)"
        inside = (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)
        for run in an._inside_runs(inside, is_closed):
            if len(run) < 2:
                continue
            q = p[run]
            pts = " ".join(f"{(x - x0) * scale:.2f},{(y1 - y) * scale:.2f}" for x, y in q)
            tag = "polygon" if is_closed and inside.all() else "polyline"
            lines.append(f'<{tag} points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# -- commands ---------------------------------------------------------------------------

def cmd_evolve(cfg: RunConfig) -> int:
    curve = resolve_curve(cfg)
    controls = EvolveControls(dt=cfg.dt, scheme=cfg.scheme, resample_ratio=cfg.resample_ratio,
                              record_stride=cfg.record_stride)
    hist = evolve(curve, cfg.t_end, controls)
    tag = {"config_hash": cfg.hash()}
    meta = dict(hist.scheme_meta, config=cfg.hashed_fields(), input=cfg.input, **tag)
    text = hist.to_jsonl(tag)
    _out(cfg, "history.jsonl").write_text(text)
    _out(cfg, "history.meta.json").write_text(_dump(meta))
    print(_dump({"status": hist.scheme_meta["status"], "steps": hist.scheme_meta["steps"],
                 "final_time": float(hist.times[-1]), "slices": len(hist), **tag}), end="")
    return EXIT_OK


def _graph_slope(curve: DiscreteCurve) -> float | None:
    d = np.diff(curve.points, axis=0)
    if curve.closed or not (np.all(d[:, 0] > 0) or np.all(d[:, 0] < 0)):
        return None
    return float(np.max(np.abs(d[:, 1] / d[:, 0])))


def measure_curve(curve: DiscreteCurve, name: str = "") -> dict:
    """Entropy, both total-curvature estimators and every applicable bound."""
    geo = compute_geometry(curve)
    ent = entropy_estimate(curve, EntropyConfig())
    tc = total_curvature(geo)
    tc_area = total_curvature_area_formula(geo, 64)
    m, flagged = integer_entropy(ent.value)
    bounds = []

    def bound(label, b, slack=5e-3):
        bounds.append({"name": label, "bound": b, "value": ent.value, "holds": ent.value <= b + slack})

    alpha = max(1, math.ceil(tc / math.pi - 1e-9))
    bound("total_curvature", entropy_bound_total_curvature(alpha))
    eta = _graph_slope(curve)
    if eta is not None:
        bound("slope", entropy_bound_slope(eta))
    if not curve.closed and tc <= math.pi / 4 + 1e-9:
        bound("quarter_arc", math.sqrt(2.0))
    if name:
        try:
            kind, args = parse_catalog_name(name)
        except ValueError:
            kind, args = "", {}
        if kind == "logspiral":
            bound("log_spiral", entropy_bound_log_spiral(args.get("k", 1.0)))
    return {"entropy": ent.to_dict(), "entropy_integer": {"m": m, "flagged": flagged},
            "total_curvature": tc, "total_curvature_area_formula": tc_area,
            "graph_slope": eta, "bounds": bounds, "samples": len(curve),
            "topology": curve.topology.value}


def cmd_measure(cfg: RunConfig) -> int:
    curve = resolve_curve(cfg)
    report = measure_curve(curve, "" if _is_file(cfg.input) else cfg.input)
    report.update(input=cfg.input, config_hash=cfg.hash())
    text = _dump(report)
    _out(cfg, "measure.json").write_text(text)
    print(text, end="")
    return EXIT_OK


def _known_m(flow: AnalyticFlow | None) -> int | None:
    if flow is None:
        return None
    value = flow.known.get("entropy", flow.known.get("entropy_bound"))
    return None if value is None else integer_entropy(float(value))[0]


def build_report(hist: FlowHistory, flow: AnalyticFlow | None, cfg: RunConfig, t0: float) -> an.DiagnosticsReport:
    """Run the selected analyzers; checks needing the entropy integer m
    only run on analytic catalog flows."""
    report = an.DiagnosticsReport(provenance={"input": cfg.input, "config_hash": cfg.hash(),
                                              "flow": flow.name if flow else "history",
                                              "x0": list(cfg.x0), "t0": t0, "skipped": []})
    skipped = report.provenance["skipped"]
    sel = cfg.selected_analyzers()
    closed = hist.slices[0].closed
    times = hist.times
    m = _known_m(flow)
    collar = 0.0 if flow is not None else cfg.collar_coeff

    if "length" in sel:
        report.add(an.check_from_series("length_monotone", an.length_series(hist), 1e-8))
    if "huisken" in sel:
        hs = an.huisken_series(hist, (cfg.x0, t0), cfg.slack_rate)
        report.add(an.check_from_series("huisken_monotone", hs, cfg.slack_rate))
        if flow is not None and "extinction_time" in flow.known:
            px, py = flow.known["extinction_point"]
            if abs(t0 - flow.known["extinction_time"]) < 1e-12 and np.allclose(cfg.x0, (px, py)):
                dev = np.abs(hs.values - flow.known["entropy"])
                report.add(an.check_bounded("huisken_constant", dev, 1e-4, times))
    if "theta2" in sel:
        if closed:
            skipped.append("theta2: closed curve")
        else:
            th = an.weighted_theta2_series(hist, (cfg.x0, t0), cfg.slack_rate)
            report.add(an.check_from_series("theta2_monotone", th, cfg.slack_rate))
    if "angle_range" in sel:
        if closed:
            skipped.append("angle_range: closed curve")
        else:
            ar = an.angle_range_series(hist)
            widths = tuple(float(b - a) for a, b in ar.ranges)
            report.add(an.Check("angle_range_nested", widths, 1e-3, ar.nested, ar.first_violation,
                                tuple(float(t) for t in times)))
    if "sturm" in sel:
        if closed:
            series = [("sturm_kappa_minus_mean", "kappa_minus_mean", 0.0)]
        else:
            lo, hi = hist.geometry[0].angle[1:-1].min(), hist.geometry[0].angle[1:-1].max()
            series = []
            for c in cfg.c_values:
                if lo < c < hi:
                    series.append((f"sturm_theta_c={c:g}", "theta_minus_c", c))
                else:
                    skipped.append(f"sturm c={c:g}: outside the initial angle range")
        for name, fld, c in series:
            z = an.zero_count_series(hist, fld, c, tol=cfg.zero_tol, collar_coeff=collar)
            report.add(an.Check(name, tuple(z.counts), 0.0, z.non_increasing, z.first_violation,
                                tuple(float(t) for t in times),
                                note=f"degenerate slices {z.degenerate}" if z.degenerate else ""))
    if "extremum_paths" in sel:
        paths = an.extremum_paths(hist, cfg.center, cfg.zero_tol)
        bad = [i for i, p in enumerate(paths)
               if p.violation() is not None or (p.kind is an.Extremum.MAX and not p.kappa_sign_constant)]
        report.add(an.Check("extremum_paths", tuple(len(p.times) for p in paths), 1e-6, not bad,
                            bad[0] if bad else None,
                            note=f"{sum(p.ambiguous for p in paths)} ambiguous matches"))

    needs_m = [a for a in ("extrema", "parallel_normals", "tc_bound", "angle_bound") if a in sel]
    if needs_m and m is None:
        skipped.extend(f"{a}: needs an analytic flow with known entropy" for a in needs_m)
        return report
    if "extrema" in sel:
        if closed:
            skipped.append("extrema: closed curve")
        else:
            rng = np.random.default_rng(cfg.seed)
            centers = rng.uniform(-cfg.center_box, cfg.center_box, (cfg.n_centers, 2))
            worst_min, worst_max = [], []
            for t, c in zip(times, hist.slices):
                counts = [an.count_local_extrema(an.distance_profile(c, x, float(t)), cfg.zero_tol)
                          for x in centers]
                worst_min.append(max(k[0] for k in counts))
                worst_max.append(max(k[1] for k in counts))
            report.add(an.check_bounded("extrema_n_min", worst_min, m, times))
            report.add(an.check_bounded("extrema_n_max", worst_max, m - 1, times))
    if "parallel_normals" in sel:
        xis = (np.arange(cfg.n_xi) + 0.5) * math.pi / cfg.n_xi
        worst = [max(count_angle_preimages(g, float(x)) for x in xis) for g in hist.geometry]
        report.add(an.check_bounded("parallel_normals", worst, 2 * m - 1, times))
    if "tc_bound" in sel:
        tcs = [total_curvature(g) for g in hist.geometry]
        if closed:
            report.add(an.check_bounded("total_curvature_bound", tcs, (2 * m + 1) * math.pi, times))
        else:
            b = (2 * m - 1) * math.pi
            report.add(an.check_bounded("total_curvature_bound", tcs, b, times, tolerance=0.02 * b))
    if "angle_bound" in sel:
        if closed:
            skipped.append("angle_bound: closed curve")
        else:
            worst = [float(np.max(np.abs(g.angle))) for g in hist.geometry]
            report.add(an.check_bounded("angle_bound", worst, (2 * m + 1) * math.pi, times))
    return report


def cmd_verify(cfg: RunConfig) -> int:
    hist, flow, t0 = load_history(cfg)
    if np.any(hist.times >= t0):
        raise InvalidInput("t0 must follow every slice")
    report = build_report(hist, flow, cfg, t0)
    _out(cfg, "verify.json").write_text(report.to_json())
    _out(cfg, "verify.csv").write_text(report.to_csv(("config_hash", cfg.hash())))
    for c in report.sorted_checks():
        status = "pass" if c.passed else f"FAIL (first violation at index {c.first_violation})"
        print(f"{c.name}: {status}")
    failure = report.first_failure()
    if failure is not None:
        print(f"verification failed: {failure.name} at index {failure.first_violation}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _rescale_source(cfg: RunConfig) -> tuple[FlowHistory, float]:
    flow = resolve_flow(cfg)
    if flow is None:
        hist, _, t0 = load_history(cfg)
        if t0 <= float(hist.times[-1]):
            raise InvalidInput("origin time lies inside the history's time range")
        return hist, t0
    t0 = cfg.t0 if cfg.t0 is not None else float(flow.known.get("extinction_time", 0.0))
    taus = np.linspace(cfg.tau_start, cfg.tau_stop, cfg.n_times)
    times = t0 - np.exp(-taus)
    x0r = float(np.hypot(*cfg.x0))
    slices = []
    try:
        for t, tau in zip(times, taus):
            grow = math.exp(-0.5 * tau)
            slices.append(_analytic_slice(flow, float(t), cfg.rescale_reach * grow + x0r,
                                          cfg.rescale_spacing * grow, cfg.n_samples))
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc
    return FlowHistory(times, tuple(slices), {"source": flow.name}), t0


def cmd_rescale(cfg: RunConfig) -> int:
    hist, t0 = _rescale_source(cfg)
    rescaled = rescale_history(hist, (cfg.x0, t0))
    rows = []
    for sl, c, g in zip(rescaled, hist.slices, hist.geometry):
        info = an.sheet_decomposition(sl, cfg.radius, cfg.eps)
        th2 = None if c.closed else weighted_integral(c, cfg.x0, t0 - sl.source_time, g.angle ** 2)
        radius = float(np.mean(np.hypot(*sl.curve.points.T)))
        rows.append([sl.tau, sl.source_time, info.n_sheets, info.graphical,
                     None if math.isnan(info.axis_angle) else info.axis_angle, th2, radius, cfg.hash()])
    header = ["tau", "t", "n_sheets", "graphical", "axis_angle", "theta2", "radius", "config_hash"]
    summary = {"config_hash": cfg.hash(), "t0": t0, "x0": list(cfg.x0)}
    if len(rescaled) >= 5:
        try:
            rc = an.rotation_convergence(rescaled, cfg.radius, cfg.eps)
            summary.update(limit=rc.limit, converged=rc.converged, total_variation=rc.total_variation,
                           excluded_taus=rc.excluded)
        except ValueError as exc:
            summary.update(rotation_error=str(exc))
    _out(cfg, "rescale.csv").write_text(_csv(header, rows))
    if cfg.svg:
        r = 1.5 * cfg.radius
        svg = svg_polylines([s.curve.points for s in rescaled], [s.curve.closed for s in rescaled],
                            cfg.hash(), box=(-r, -r, r, r))
        _out(cfg, "rescale.svg").write_text(svg)
    print(_dump(summary), end="")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    hist, _, _ = load_history(cfg)
    rows = []
    for t, c, g in zip(hist.times, hist.slices, hist.geometry):
        th = (None, None) if c.closed else (float(g.angle.min()), float(g.angle.max()))
        rows.append([t, c.length(), total_curvature(g), th[0], th[1], len(c), cfg.hash()])
    header = ["t", "length", "total_curvature", "theta_min", "theta_max", "samples", "config_hash"]
    _out(cfg, "series.csv").write_text(_csv(header, rows))
    if cfg.svg:
        pick = np.unique(np.linspace(0, len(hist) - 1, min(len(hist), 12)).round().astype(int))
        svg = svg_polylines([hist.slices[i].points for i in pick], [hist.slices[i].closed for i in pick],
                            cfg.hash())
        _out(cfg, "slices.svg").write_text(svg)
    print(_dump({"config_hash": cfg.hash(), "slices": len(hist)}), end="")
    return EXIT_OK


COMMANDS = {"evolve": cmd_evolve, "measure": cmd_measure, "verify": cmd_verify,
            "rescale": cmd_rescale, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csflab", description="Curve shortening flow laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "evolve": "evolve a curve JSON or catalog curve forward in time",
        "measure": "entropy, total curvature and entropy bounds of one curve",
        "verify": "run invariant checks on a history or analytic flow",
        "rescale": "rescaled-flow sheet and axis report (CSV + SVG)",
        "report": "per-slice series and an SVG overlay of a history",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("input", help="curve/history file or catalog name, e.g. circle:r0=1")
        p.add_argument("--config", help="key = value file overriding defaults")
        for f in fields(RunConfig):
            if f.name in ("command", "input"):
                continue
            flag = "--" + f.name.replace("_", "-")
            p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper(),
                           help=f"default: {f.default}")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)
                 if f.name not in ("command", "input")}
    try:
        cfg = load_config(args.config, command=args.command, input=args.input, **overrides)
    except (ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](cfg)
    except (InvalidInput, InvalidCurveError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StabilityError, SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
