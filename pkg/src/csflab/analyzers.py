"""Invariant checks on recorded or analytic flows.

Every analyzer reads :class:`~csflab.flow.FlowHistory` (or single curves)
and returns plain dataclasses; :class:`DiagnosticsReport` collects named
checks with pass flags, tolerances and the first violating index.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .curve import DiscreteCurve, GeometryField, compute_geometry
from .flow import FlowHistory, RescaledSlice
from .functionals import weighted_integral, gaussian_length

ZERO_TOL = 1e-8


class DegenerateFieldError(ValueError):
    """The sampled field vanishes identically."""


class FlatPointError(ValueError):
    """Curvature is too small for an osculating circle."""


# -- squared distance --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DistanceProfile:
    s: np.ndarray
    phi: np.ndarray
    center: tuple[float, float]
    time: float
    closed: bool
    length: float


def distance_profile(curve: DiscreteCurve, center, time: float = 0.0) -> DistanceProfile:
    """``phi = |gamma - x0|^2 + 2t`` at every sample."""
    x0 = np.asarray(center, dtype=float)
    d = curve.points - x0
    h = curve.spacings()
    s = np.concatenate([[0.0], np.cumsum(h[: len(curve) - 1])])
    return DistanceProfile(s, np.einsum("ij,ij->i", d, d) + 2.0 * time,
                           (float(x0[0]), float(x0[1])), float(time), curve.closed, float(np.sum(h)))


class Extremum(str, Enum):
    MIN = "local_min"
    MAX = "local_max"
    DEGENERATE = "degenerate"


def _slope_signs(values: np.ndarray, closed: bool, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Signs of the discrete slope with plateaus dropped, and their start index."""
    d = np.diff(np.append(values, values[0])) if closed else np.diff(values)
    scale = float(np.max(np.abs(values))) or 1.0
    sign = np.where(np.abs(d) <= tol * scale, 0, np.sign(d)).astype(int)
    idx = np.nonzero(sign)[0]
    return sign[idx], idx


def find_local_extrema(profile: DistanceProfile, tol: float = ZERO_TOL) -> list[tuple[int, Extremum]]:
    """Interior strict extrema as ``(sample index, kind)`` in sample order.

    A plateau between a rise and a fall counts once; its middle sample is
    reported.  Closed profiles are treated cyclically.
    """
    phi = profile.phi
    n = len(phi)
    signs, idx = _slope_signs(phi, profile.closed, tol)
    out = []
    if len(signs) < 2:
        return out
    pairs = range(len(signs)) if profile.closed else range(len(signs) - 1)
    for k in pairs:
        a, b = signs[k], signs[(k + 1) % len(signs)]
        if a == b:
            continue
        i0, i1 = idx[k] + 1, idx[(k + 1) % len(signs)]
        if i1 < i0:
            i1 += n
        mid = ((i0 + i1) // 2) % n
        out.append((mid, Extremum.MAX if a > 0 else Extremum.MIN))
    out.sort(key=lambda item: item[0])
    return out


def count_local_extrema(profile: DistanceProfile, tol: float = ZERO_TOL) -> tuple[int, int]:
    """``(n_min, n_max)`` of interior strict extrema."""
    if len(profile.phi) < 16:
        raise ValueError("need at least 16 samples")
    ext = find_local_extrema(profile, tol)
    n_min = sum(1 for _, k in ext if k is Extremum.MIN)
    return n_min, len(ext) - n_min


def classify_critical_point(geometry: GeometryField, index: int, center,
                            tol: float = 1e-6, normal_tol: float = 1e-6) -> Extremum:
    """Type of the critical point of ``phi`` at a sample lying on the normal through ``center``.

    With ``x0 = gamma + (beta/kappa) n`` the second derivative of
    ``|gamma - x0|^2`` is ``2(1 - beta)``, so ``beta > 1`` is a maximum,
    ``beta < 1`` a minimum and ``beta = 1`` the osculating centre.
    """
    if geometry.points is None:
        raise ValueError("geometry carries no sample positions")
    x0 = np.asarray(center, dtype=float)
    w = x0 - geometry.points[index]
    dist = float(np.hypot(*w))
    if abs(float(np.dot(w, geometry.tangent[index]))) > normal_tol * max(dist, 1e-300):
        raise ValueError("center is not on the normal line at this sample")
    beta = float(geometry.curvature[index]) * float(np.dot(w, geometry.normal[index]))
    if beta > 1.0 + tol:
        return Extremum.MAX
    if beta < 1.0 - tol:
        return Extremum.MIN
    return Extremum.DEGENERATE


def osculating_center(geometry: GeometryField, index: int) -> tuple[float, float]:
    k = float(geometry.curvature[index])
    if abs(k) <= 1e-10:
        raise FlatPointError(f"curvature {k:g} at sample {index}: osculating circle undefined")
    if geometry.points is None:
        raise ValueError("geometry carries no sample positions")
    c = geometry.points[index] + geometry.normal[index] / k
    return float(c[0]), float(c[1])


# -- Sturm zero counting -----------------------------------------------------

def sturm_zero_count(values, closed: bool = False, tol: float = ZERO_TOL, floor: float = 0.0) -> int:
    """Number of zeros of a sampled field.

    Sign changes between consecutive samples count once each, and so does
    every run of near-zero samples (``|v| <= max(tol * max|v|, floor)``),
    whether the field crosses there or only touches.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 8:
        raise ValueError("need at least 8 samples")
    scale = float(np.max(np.abs(v)))
    near = np.abs(v) <= max(tol * scale, floor)
    if scale == 0.0 or np.all(near):
        raise DegenerateFieldError("field vanishes identically")
    if closed:
        start = int(np.argmin(near))
        v = np.roll(v, -start)
        near = np.roll(near, -start)
        v = np.append(v, v[0])
        near = np.append(near, False)
    count = 0
    last = None
    in_run = False
    for i in range(len(v)):
        if near[i]:
            in_run = True
            continue
        if last is None:
            count += int(in_run)
        elif in_run or np.sign(v[i]) != np.sign(v[last]):
            count += 1
        in_run = False
        last = i
    return count + int(in_run)


FIELDS = ("theta_minus_c", "phi_s", "kappa", "kappa_minus_mean")

# absolute zero floor per field, relative to a natural scale of the slice
FLOOR_FACTOR = 1e-9


def _field_floor(geometry: GeometryField, name: str, center) -> float:
    if name == "theta_minus_c":
        return FLOOR_FACTOR
    if name == "phi_s":
        w = geometry.points - np.asarray(center, dtype=float)
        return FLOOR_FACTOR * float(np.max(np.hypot(w[:, 0], w[:, 1])))
    return FLOOR_FACTOR * float(np.max(np.abs(geometry.curvature)))


def scalar_field(geometry: GeometryField, name: str, c: float = 0.0, center=(0.0, 0.0)) -> np.ndarray:
    if name == "theta_minus_c":
        if geometry.closed:
            raise ValueError("theta has no global branch on a closed curve")
        return geometry.angle - c
    if name == "phi_s":
        w = geometry.points - np.asarray(center, dtype=float)
        return np.einsum("ij,ij->i", w, geometry.tangent)
    if name == "kappa":
        return geometry.curvature - c
    if name == "kappa_minus_mean":
        k = geometry.curvature
        h = geometry.spacing
        if geometry.closed:
            mean = float(np.sum(0.5 * (k + np.roll(k, -1)) * h) / np.sum(h))
        else:
            mean = float(np.sum(0.5 * (k[:-1] + k[1:]) * h) / np.sum(h))
        return k - mean
    raise ValueError(f"unknown field {name!r}; expected one of {FIELDS}")


@dataclass(frozen=True)
class ZeroCountSeries:
    times: np.ndarray
    counts: list[int | None]
    collar_zeros: list[int]
    first_violation: int | None
    degenerate: list[int]

    @property
    def non_increasing(self) -> bool:
        return self.first_violation is None


def _collar_mask(geo: GeometryField, width: float) -> np.ndarray:
    if geo.closed or width <= 0:
        return np.ones(len(geo.curvature), dtype=bool)
    s = geo.arclength
    return (s >= width) & (s <= s[-1] - width)


def zero_count_series(history: FlowHistory, field_name: str = "theta_minus_c", c: float = 0.0,
                      center=(0.0, 0.0), tol: float = ZERO_TOL, collar_coeff: float = 0.0) -> ZeroCountSeries:
    """Sturm counts per slice; they must not increase in time.

    For open curves the samples within ``collar_coeff * sqrt(t - t_first)``
    of either end are excluded (pinned-endpoint artefacts); zeros found
    there are recorded in ``collar_zeros``.  Slices whose field vanishes
    identically get count ``None`` and are listed in ``degenerate``.
    """
    counts, collar, degenerate = [], [], []
    t_first = float(history.times[0])
    for i, (t, geo) in enumerate(zip(history.times, history.geometry)):
        f = scalar_field(geo, field_name, c, center)
        floor = _field_floor(geo, field_name, center)
        mask = _collar_mask(geo, collar_coeff * math.sqrt(max(float(t) - t_first, 0.0)))
        try:
            inner = sturm_zero_count(f[mask], geo.closed, tol, floor) if mask.sum() >= 8 else 0
        except DegenerateFieldError:
            counts.append(None)
            degenerate.append(i)
            collar.append(0)
            continue
        counts.append(inner)
        if not mask.all():
            try:
                collar.append(max(sturm_zero_count(f, geo.closed, tol, floor) - inner, 0))
            except DegenerateFieldError:
                collar.append(0)
        else:
            collar.append(0)
    first = None
    prev = None
    for i, k in enumerate(counts):
        if k is None:
            continue
        if prev is not None and k > prev:
            first = i
            break
        prev = k
    return ZeroCountSeries(history.times, counts, collar, first, degenerate)


# -- extremum paths ------------------------------------------------------------

def _refined_value(prof: DistanceProfile, i: int) -> float:
    """Vertex of the parabola through the extremal sample and its neighbours."""
    phi, s = prof.phi, prof.s
    n = len(phi)
    if not prof.closed and (i == 0 or i == n - 1):
        return float(phi[i])
    im, ip = (i - 1) % n, (i + 1) % n
    sm = (s[i] - s[im]) % prof.length
    sp = (s[ip] - s[i]) % prof.length
    f0, fm, fp = phi[i], phi[im], phi[ip]
    # quadratic f0 + b x + a x^2 through (-sm, fm) and (sp, fp)
    a = ((fp - f0) / sp + (fm - f0) / sm) / (sp + sm)
    b = (fp - f0) / sp - a * sp
    if a == 0:
        return float(f0)
    x = -b / (2 * a)
    if not -sm <= x <= sp:
        return float(f0)
    return float(f0 + b * x + a * x * x)


@dataclass
class ExtremumPath:
    kind: Extremum
    times: list[float] = field(default_factory=list)
    indices: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    positions: list[float] = field(default_factory=list)
    kappa_signs: list[int] = field(default_factory=list)
    ambiguous: bool = False

    def violation(self, slack: float = 1e-6) -> int | None:
        """First index where the value moves the wrong way, else ``None``."""
        v = self.values
        for i in range(1, len(v)):
            allow = slack * max(abs(v[i - 1]), 1.0)
            if self.kind is Extremum.MIN and v[i] < v[i - 1] - allow:
                return i
            if self.kind is Extremum.MAX and v[i] > v[i - 1] + allow:
                return i
        return None

    @property
    def kappa_sign_constant(self) -> bool:
        nz = [k for k in self.kappa_signs if k != 0]
        return len(set(nz)) <= 1

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "times": self.times, "indices": self.indices,
                "values": self.values, "ambiguous": self.ambiguous}


def _cyclic_gap(a: float, b: float, closed: bool) -> float:
    d = abs(a - b)
    return min(d, 1.0 - d) if closed else d


def extremum_paths(history: FlowHistory, center, tol: float = ZERO_TOL,
                   match_gate: float = 0.25) -> list[ExtremumPath]:
    """Follow the extrema of ``phi`` through consecutive slices.

    Extrema are matched to the nearest same-kind extremum of the previous
    slice in normalised arclength.  Equal distances go to the smaller
    arclength and flag the path as ambiguous.
    """
    if len(history) < 3:
        raise ValueError("need at least 3 slices")
    finished: list[ExtremumPath] = []
    live: list[ExtremumPath] = []
    for t, c, geo in zip(history.times, history.slices, history.geometry):
        prof = distance_profile(c, center, float(t))
        found = []
        for i, kind in find_local_extrema(prof, tol):
            found.append((prof.s[i] / prof.length, i, kind, _refined_value(prof, i),
                          int(np.sign(geo.curvature[i]))))
        taken: set[int] = set()
        next_live = []
        for pos, i, kind, val, ksign in found:
            best, best_d, tie = None, None, False
            for j, p in enumerate(live):
                if j in taken or p.kind is not kind:
                    continue
                d = _cyclic_gap(pos, p.positions[-1], c.closed)
                if d > match_gate:
                    continue
                if best_d is not None and abs(d - best_d) <= 1e-12:
                    tie = True
                    if p.positions[-1] < live[best].positions[-1]:
                        best = j
                elif best_d is None or d < best_d:
                    best, best_d, tie = j, d, False
            if best is None:
                path = ExtremumPath(kind)
            else:
                taken.add(best)
                path = live[best]
                path.ambiguous |= tie
            path.times.append(float(t))
            path.indices.append(int(i))
            path.values.append(val)
            path.positions.append(float(pos))
            path.kappa_signs.append(ksign)
            next_live.append(path)
        finished.extend(p for j, p in enumerate(live) if j not in taken)
        live = next_live
    paths = finished + live
    paths.sort(key=lambda p: (p.times[0], p.positions[0], p.kind.value))
    return paths


# -- monotone series -----------------------------------------------------------

@dataclass(frozen=True)
class MonotoneSeries:
    times: np.ndarray
    values: np.ndarray
    first_violation: int | None
    slack: np.ndarray

    @property
    def non_increasing(self) -> bool:
        return self.first_violation is None


def rising_steps(values: np.ndarray, slack: np.ndarray) -> list[int]:
    """Indices ``i`` with ``values[i] > values[i-1] + slack[i-1]``."""
    v = np.asarray(values, dtype=float)
    return [int(i) + 1 for i in np.nonzero(v[1:] > v[:-1] + slack)[0]]


def _non_increasing(times: np.ndarray, values: np.ndarray, slack: np.ndarray) -> int | None:
    bad = rising_steps(values, slack)
    return bad[0] if bad else None


def _spacetime_check(history: FlowHistory, t0: float) -> None:
    if np.any(history.times >= t0):
        raise ValueError("every slice must precede t0")


def huisken_series(history: FlowHistory, spacetime_point, slack_rate: float = 1e-3) -> MonotoneSeries:
    """``F_{x0, t0 - t}[M_t]`` per slice, checked non-increasing.

    Step ``i -> i+1`` may rise by at most ``slack_rate * (t_{i+1} - t_i)``.
    """
    x0, t0 = spacetime_point
    _spacetime_check(history, t0)
    vals = np.array([gaussian_length(c, x0, t0 - t) for t, c in zip(history.times, history.slices)])
    slack = slack_rate * np.diff(history.times)
    return MonotoneSeries(history.times, vals, _non_increasing(history.times, vals, slack), slack)


def weighted_theta2_series(history: FlowHistory, spacetime_point, slack_rate: float = 1e-3,
                           abs_slack: float = 1e-12) -> MonotoneSeries:
    """``int theta^2 Phi ds`` with the backward heat kernel at ``(x0, t0)``."""
    x0, t0 = spacetime_point
    _spacetime_check(history, t0)
    if any(c.closed for c in history.slices):
        raise ValueError("theta-squared series needs open curves")
    vals = np.array([weighted_integral(c, x0, t0 - t, g.angle ** 2)
                     for t, c, g in zip(history.times, history.slices, history.geometry)])
    slack = slack_rate * np.diff(history.times) + abs_slack
    return MonotoneSeries(history.times, vals, _non_increasing(history.times, vals, slack), slack)


@dataclass(frozen=True)
class AngleRangeSeries:
    times: np.ndarray
    ranges: np.ndarray
    first_violation: int | None

    @property
    def nested(self) -> bool:
        return self.first_violation is None


def angle_range_series(history: FlowHistory, slack: float = 1e-3) -> AngleRangeSeries:
    """Interior ``[min theta, max theta]`` per slice; later ranges must nest."""
    if any(c.closed for c in history.slices):
        raise ValueError("angle range needs open curves")
    ranges = np.array([[g.angle[1:-1].min(), g.angle[1:-1].max()] for g in history.geometry])
    first = None
    for i in range(1, len(ranges)):
        if ranges[i, 0] < ranges[i - 1, 0] - slack or ranges[i, 1] > ranges[i - 1, 1] + slack:
            first = i
            break
    return AngleRangeSeries(history.times, ranges, first)


# -- rescaled structure --------------------------------------------------------

@dataclass(frozen=True)
class SheetInfo:
    n_sheets: int
    graphical: bool
    axis_angle: float
    max_offset: float
    max_slope: float


def _inside_runs(inside: np.ndarray, closed: bool) -> list[np.ndarray]:
    n = len(inside)
    if closed and inside.all():
        return [np.arange(n)]
    idx = np.arange(n)
    if closed:
        start = int(np.argmin(inside))
        idx = np.roll(idx, -start)
    runs, cur = [], []
    for i in idx:
        if inside[i]:
            cur.append(i)
        elif cur:
            runs.append(np.array(cur))
            cur = []
    if cur:
        runs.append(np.array(cur))
    return runs


def sheet_decomposition(slice_: RescaledSlice | DiscreteCurve, radius: float = 1.0,
                        eps: float = 0.05) -> SheetInfo:
    """Pieces of the slice inside ``B_R(0)`` and their fit to a common line.

    The line through the origin is the principal direction of the clipped
    samples' second moment.  A piece is graphical when its coordinate along
    the line is strictly monotone and both its offset and slope stay within
    ``eps``.  Closed pieces are never graphical.  Sheets count multiplicity.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    curve = slice_.curve if isinstance(slice_, RescaledSlice) else slice_
    p = curve.points
    inside = np.hypot(p[:, 0], p[:, 1]) < radius
    if not inside.any():
        return SheetInfo(0, False, float("nan"), float("nan"), float("nan"))
    q = p[inside]
    m = q.T @ q
    w, v = np.linalg.eigh(m)
    u = v[:, int(np.argmax(w))]
    angle = math.atan2(u[1], u[0]) % math.pi
    u = np.array([math.cos(angle), math.sin(angle)])
    nrm = np.array([-u[1], u[0]])
    runs = _inside_runs(inside, curve.closed)
    closed_piece = curve.closed and inside.all()
    graphical = not closed_piece
    max_off = max_slope = 0.0
    for r in runs:
        a = p[r] @ u
        b = p[r] @ nrm
        max_off = max(max_off, float(np.max(np.abs(b))))
        if len(r) >= 2:
            da, db = np.diff(a), np.diff(b)
            if not (np.all(da > 0) or np.all(da < 0)):
                graphical = False
                max_slope = math.inf
            else:
                max_slope = max(max_slope, float(np.max(np.abs(db / da))))
    graphical = graphical and max_off <= eps and max_slope <= eps
    return SheetInfo(len(runs) * curve.multiplicity, bool(graphical), angle, max_off, max_slope)


@dataclass(frozen=True)
class RotationResult:
    taus: np.ndarray
    angles: np.ndarray
    excluded: list[float]
    converged: bool
    limit: float
    total_variation: float


def rotation_convergence(slices: list[RescaledSlice], radius: float = 1.0, eps: float = 0.05,
                         tv_tol: float = 1e-3) -> RotationResult:
    """Lifted axis angle along ``tau -> -infinity``.

    Slices are ordered by decreasing ``tau``; non-graphical ones are
    dropped and listed in ``excluded``.  Convergence means the total
    variation over the last half of the series is below ``tv_tol``.
    """
    if len(slices) < 5:
        raise ValueError("need at least 5 slices")
    ordered = sorted(slices, key=lambda s: -s.tau)
    taus, raw, excluded = [], [], []
    for sl in ordered:
        info = sheet_decomposition(sl, radius, eps)
        if not info.graphical:
            excluded.append(sl.tau)
            continue
        taus.append(sl.tau)
        raw.append(info.axis_angle)
    if len(raw) < 2:
        raise ValueError("fewer than 2 graphical slices")
    lifted = [raw[0]]
    for a in raw[1:]:
        prev = lifted[-1]
        lifted.append(a + math.pi * round((prev - a) / math.pi))
    lifted = np.array(lifted)
    tail = lifted[len(lifted) // 2:]
    tv = float(np.sum(np.abs(np.diff(tail))))
    return RotationResult(np.array(taus), lifted, excluded, tv < tv_tol,
                          float(lifted[-1] % math.pi), tv)


def angle_distance_mod_pi(a: float, b: float) -> float:
    d = (a - b) % math.pi
    return min(d, math.pi - d)


# -- divergence of distance ------------------------------------------------------

@dataclass(frozen=True)
class DivergenceCheck:
    start: bool
    end: bool

    def __bool__(self) -> bool:
        return self.start and self.end


def distance_divergence_check(curve: DiscreteCurve, center) -> DivergenceCheck:
    """Per-end tail proxy: the mean distance over the outer 10% of samples
    must exceed the mean over the adjacent inner 10%."""
    if curve.closed:
        raise ValueError("divergence check needs an open curve")
    d = np.hypot(*(curve.points - np.asarray(center, dtype=float)).T)
    k = max(1, len(d) // 10)
    if 2 * k > len(d):
        raise ValueError("too few samples")
    start = float(d[:k].mean()) > float(d[k:2 * k].mean())
    end = float(d[-k:].mean()) > float(d[-2 * k:-k].mean())
    return DivergenceCheck(start, end)


# -- heat equation residuals -------------------------------------------------------

def _d_ds(f: np.ndarray, geo: GeometryField) -> np.ndarray:
    """Centred first derivative in arclength on the interior samples."""
    h = geo.spacing
    hm, hp = h[:-1], h[1:]
    fm, f0, fp = f[:-2], f[1:-1], f[2:]
    return (hm / hp * (fp - f0) + hp / hm * (f0 - fm)) / (hm + hp)


def _d2_ds2(f: np.ndarray, geo: GeometryField) -> np.ndarray:
    h = geo.spacing
    hm, hp = h[:-1], h[1:]
    return 2.0 * ((f[2:] - f[1:-1]) / hp - (f[1:-1] - f[:-2]) / hm) / (hm + hp)


def heat_residual(before: DiscreteCurve, after: DiscreteCurve, t_before: float, t_after: float,
                  quantity: str = "theta", center=(0.0, 0.0), collar: float = 0.0) -> float:
    """Max interior ``|u_t - u_ss|`` between two slices with the same samples.

    ``quantity`` is ``"theta"`` or ``"phi"``.  The parameter velocity is
    split into its normal and tangential parts and the tangential
    transport ``alpha u_s`` removed, so the residual refers to the normal
    parametrisation in which both fields solve the heat equation.  Spatial
    derivatives are taken at the later slice.
    """
    if before.closed or after.closed or len(before) != len(after):
        raise ValueError("need two open slices on the same samples")
    dt = t_after - t_before
    g0, g1 = compute_geometry(before), compute_geometry(after)
    if quantity == "theta":
        u0, u1 = g0.angle, g1.angle
        u1 = u1 + 2 * math.pi * round(float(np.mean(u0 - u1)) / (2 * math.pi))
    elif quantity == "phi":
        x0 = np.asarray(center, dtype=float)
        u0 = np.sum((before.points - x0) ** 2, axis=1) + 2.0 * t_before
        u1 = np.sum((after.points - x0) ** 2, axis=1) + 2.0 * t_after
    else:
        raise ValueError("quantity must be 'theta' or 'phi'")
    vel = (after.points - before.points) / dt
    alpha = np.einsum("ij,ij->i", vel, g1.tangent)[1:-1]
    u_t = (u1 - u0)[1:-1] / dt
    res = np.abs(u_t - alpha * _d_ds(u1, g1) - _d2_ds2(u1, g1))
    s = g1.arclength[1:-1]
    keep = (s >= collar) & (s <= g1.arclength[-1] - collar)
    return float(res[keep].max())


# -- length ---------------------------------------------------------------------------

def length_series(history: FlowHistory, rel_slack: float = 1e-8) -> MonotoneSeries:
    vals = history.lengths()
    slack = rel_slack * vals[:-1]
    return MonotoneSeries(history.times, vals, _non_increasing(history.times, vals, slack), slack)


# -- reports ------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    """One named invariant check.

    ``values`` is a series (aligned with ``times`` when given) or a single
    count.  A failing check must name its first violating index.
    """

    name: str
    values: tuple
    tolerance: float
    passed: bool
    first_violation: int | None = None
    times: tuple | None = None
    bound: float | None = None
    note: str = ""
    # every violating index when known; otherwise only the first is marked
    violations: tuple = ()

    def __post_init__(self) -> None:
        if not self.passed and self.first_violation is None:
            raise ValueError(f"failing check {self.name!r} needs a first violating index")

    def row_passed(self, i: int) -> bool:
        if self.violations:
            return i not in self.violations
        return i != self.first_violation

    def to_dict(self) -> dict:
        return {"name": self.name, "values": list(self.values), "tolerance": self.tolerance,
                "pass": self.passed, "first_violation": self.first_violation,
                "times": None if self.times is None else list(self.times),
                "bound": self.bound, "note": self.note, "violations": list(self.violations)}


def check_from_series(name: str, series: MonotoneSeries, tolerance: float, note: str = "") -> Check:
    return Check(name, tuple(float(v) for v in series.values), tolerance, series.non_increasing,
                 series.first_violation, tuple(float(t) for t in series.times), note=note,
                 violations=tuple(rising_steps(series.values, series.slack)))


def check_bounded(name: str, values, bound: float, times=None, tolerance: float = 0.0,
                  note: str = "") -> Check:
    """Every value must be at most ``bound + tolerance``."""
    vals = [float(v) for v in values]
    bad = [i for i, v in enumerate(vals) if v > bound + tolerance]
    return Check(name, tuple(vals), tolerance, not bad, bad[0] if bad else None,
                 None if times is None else tuple(float(t) for t in times), bound, note,
                 tuple(bad))


@dataclass
class DiagnosticsReport:
    checks: list[Check] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, check: Check) -> None:
        self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self) -> Check | None:
        for c in self.sorted_checks():
            if not c.passed:
                return c
        return None

    def sorted_checks(self) -> list[Check]:
        return sorted(self.checks, key=lambda c: c.name)

    def to_dict(self) -> dict:
        return {"provenance": self.provenance, "pass": self.passed,
                "checks": [c.to_dict() for c in self.sorted_checks()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_csv(self, extra_column: tuple[str, str] | None = None) -> str:
        """Rows ``t, check_name, value, bound, pass``; ``t`` is empty for counts."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "check_name", "value", "bound", "pass"]
        if extra_column:
            header.append(extra_column[0])
        w.writerow(header)
        for c in self.sorted_checks():
            for i, v in enumerate(c.values):
                t = "" if c.times is None else repr(float(c.times[i]))
                ok = c.row_passed(i)
                row = [t, c.name, repr(float(v)) if v is not None else "",
                       "" if c.bound is None else repr(float(c.bound)), str(ok).lower()]
                if extra_column:
                    row.append(extra_column[1])
                w.writerow(row)
        return buf.getvalue()
