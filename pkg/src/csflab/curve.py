"""Discrete planar curves and their first/second order geometry.

A curve is an ordered array of samples, either closed (cyclic, the first
point is *not* repeated at the end) or open (a truncation of a non-compact
curve).  Everything downstream consumes :class:`GeometryField`, computed by
:func:`compute_geometry`.

Sign conventions: ``t`` is the unit tangent in the direction of increasing
sample index, ``n = J t`` (counterclockwise rotation by pi/2) and the signed
curvature satisfies ``theta_s = kappa``.  A counterclockwise circle therefore
has positive curvature.  Reversing the sample order flips the sign of
``kappa`` and shifts ``theta`` by pi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

TWO_PI = 2.0 * math.pi


class Topology(str, Enum):
    CLOSED = "closed"
    OPEN = "open"


class InvalidCurveError(ValueError):
    """Raised when samples do not describe a valid discrete curve."""


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Ordered planar samples with topology and multiplicity.

    ``anchor`` is the sample playing the role of the parameter origin: the
    angle function is normalised so that ``theta[anchor]`` lies in
    ``[0, 2*pi)``.
    """

    points: np.ndarray
    topology: Topology = Topology.OPEN
    multiplicity: int = 1
    anchor: int = 0

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidCurveError("points must be an (n, 2) array")
        if len(pts) < 3:
            raise InvalidCurveError("a curve needs at least 3 samples")
        if not np.all(np.isfinite(pts)):
            raise InvalidCurveError("points must be finite")
        topo = Topology(self.topology)
        if int(self.multiplicity) < 1:
            raise InvalidCurveError("multiplicity must be a positive integer")
        if not 0 <= int(self.anchor) < len(pts):
            raise InvalidCurveError("anchor index out of range")
        seg = np.diff(pts, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0.0):
            raise InvalidCurveError("consecutive samples coincide")
        if topo is Topology.CLOSED and np.array_equal(pts[0], pts[-1]):
            raise InvalidCurveError("closed curves must not repeat the first point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "topology", topo)
        object.__setattr__(self, "multiplicity", int(self.multiplicity))
        object.__setattr__(self, "anchor", int(self.anchor))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def closed(self) -> bool:
        return self.topology is Topology.CLOSED

    def segments(self) -> np.ndarray:
        """Segment vectors; closed curves include the closing segment."""
        if self.closed:
            return np.roll(self.points, -1, axis=0) - self.points
        return np.diff(self.points, axis=0)

    def spacings(self) -> np.ndarray:
        seg = self.segments()
        return np.hypot(seg[:, 0], seg[:, 1])

    def length(self) -> float:
        return float(np.sum(self.spacings()))

    def diameter(self) -> float:
        """Diameter of the bounding box (cheap upper bound of the true one)."""
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def with_points(self, points: np.ndarray, anchor: int | None = None) -> "DiscreteCurve":
        return DiscreteCurve(points, self.topology, self.multiplicity,
                             self.anchor if anchor is None else anchor)

    def transformed(self, rotation: float = 0.0, shift=(0.0, 0.0), scale: float = 1.0) -> "DiscreteCurve":
        """Apply ``x -> scale * R(rotation) x + shift``."""
        c, s = math.cos(rotation), math.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        return self.with_points(scale * self.points @ rot.T + np.asarray(shift, float))

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        out = {
            "topology": self.topology.value,
            "multiplicity": self.multiplicity,
            "points": self.points.tolist(),
        }
        if self.anchor:
            out["anchor"] = self.anchor
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteCurve":
        try:
            return cls(np.asarray(data["points"], dtype=float),
                       Topology(data.get("topology", "open")),
                       int(data.get("multiplicity", 1)),
                       int(data.get("anchor", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidCurveError):
                raise
            raise InvalidCurveError(f"malformed curve record: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiscreteCurve":
        return cls.from_dict(json.loads(text))


def save_curve(curve: DiscreteCurve, path: str | Path) -> None:
    Path(path).write_text(curve.to_json() + "\n")


def load_curve(path: str | Path) -> DiscreteCurve:
    try:
        return DiscreteCurve.from_json(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidCurveError(f"not valid JSON: {exc}") from exc


@dataclass(frozen=True, eq=False)
class GeometryField:
    """Per-sample arclength, frame, signed curvature and unwrapped angle."""

    arclength: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    angle: np.ndarray
    spacing: np.ndarray
    closed: bool
    # open curves: endpoint values come from one-sided stencils
    endpoint_lower_accuracy: bool = field(default=False)
    points: np.ndarray | None = None

    @property
    def length(self) -> float:
        return float(np.sum(self.spacing))

    def interior(self) -> slice:
        return slice(None) if self.closed else slice(1, -1)


def _turning_safe_unwrap(raw: np.ndarray) -> np.ndarray:
    theta = np.unwrap(raw)
    if np.any(np.abs(np.diff(theta)) >= math.pi):
        raise InvalidCurveError("tangent turns by pi between adjacent samples")
    return theta


def compute_geometry(curve: DiscreteCurve) -> GeometryField:
    """Arclength, unit tangent/normal, signed curvature and angle.

    Curvature uses the circle through three consecutive samples, which is
    second order accurate for smoothly varying spacing.  Tangents use the
    matching three point derivative.  Open-curve endpoints fall back to
    one-sided stencils.
    """
    p = curve.points
    n = len(p)
    if curve.closed:
        prev = np.roll(p, 1, axis=0)
        nxt = np.roll(p, -1, axis=0)
    else:
        prev, nxt = p[:-2], p[2:]
        p_mid = p[1:-1]
    a = (p if curve.closed else p_mid) - prev
    b = nxt - (p if curve.closed else p_mid)
    ha = np.hypot(a[:, 0], a[:, 1])
    hb = np.hypot(b[:, 0], b[:, 1])
    c = a + b
    hc = np.hypot(c[:, 0], c[:, 1])
    if np.any(hc == 0.0):
        raise InvalidCurveError("curve folds back onto itself (cusp)")
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    kappa_mid = 2.0 * cross / (ha * hb * hc)
    tan_mid = (ha / hb)[:, None] * b + (hb / ha)[:, None] * a
    tan_mid /= (ha + hb)[:, None]

    if curve.closed:
        kappa = kappa_mid
        tangent = tan_mid
    else:
        kappa = np.empty(n)
        kappa[1:-1] = kappa_mid
        tangent = np.empty((n, 2))
        tangent[1:-1] = tan_mid
        h = np.hypot(*np.diff(p, axis=0).T)
        tangent[0] = _one_sided_derivative(p[0], p[1], p[2], h[0], h[1])
        tangent[-1] = -_one_sided_derivative(p[-1], p[-2], p[-3], h[-1], h[-2])
        if n >= 4:
            kappa[0] = kappa[1] + (kappa[1] - kappa[2]) * h[0] / h[1]
            kappa[-1] = kappa[-2] + (kappa[-2] - kappa[-3]) * h[-1] / h[-2]
        else:
            kappa[0] = kappa[-1] = kappa[1]

    norm = np.hypot(tangent[:, 0], tangent[:, 1])
    if np.any(norm == 0.0):
        raise InvalidCurveError("degenerate tangent")
    tangent = tangent / norm[:, None]
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])

    spacing = curve.spacings()
    s = np.concatenate([[0.0], np.cumsum(spacing[: n - 1])])

    theta = _turning_safe_unwrap(np.arctan2(tangent[:, 1], tangent[:, 0]))
    theta -= TWO_PI * math.floor(theta[curve.anchor] / TWO_PI)
    if theta[curve.anchor] > TWO_PI - 1e-12:  # round-off just below a full turn
        theta -= TWO_PI

    return GeometryField(s, tangent, normal, kappa, theta, spacing,
                         curve.closed, endpoint_lower_accuracy=not curve.closed,
                         points=curve.points)


def _one_sided_derivative(p0, p1, p2, h1, h2):
    return (-(2 * h1 + h2) / (h1 * (h1 + h2)) * p0
            + (h1 + h2) / (h1 * h2) * p1
            - h1 / (h2 * (h1 + h2)) * p2)


def resample_by_arclength(curve: DiscreteCurve, target_spacing: float) -> DiscreteCurve:
    """Redistribute samples to near-uniform spacing along a cubic spline.

    The spline is parametrised by cumulative chord length (periodic for
    closed curves).  Open curves keep both endpoints exactly; closed curves
    keep the first sample.
    """
    total = curve.length()
    if not target_spacing > 0 or target_spacing >= total / 3.0:
        raise ValueError(f"target spacing {target_spacing} incompatible with length {total}")
    p = curve.points
    h = curve.spacings()
    if curve.closed:
        knots = np.concatenate([[0.0], np.cumsum(h)])
        spline = CubicSpline(knots, np.vstack([p, p[:1]]), bc_type="periodic")
        m = max(3, int(round(total / target_spacing)))
        u = np.linspace(0.0, total, m, endpoint=False)
        new = spline(u)
        anchor = int(round(knots[curve.anchor] / total * m)) % m
    else:
        knots = np.concatenate([[0.0], np.cumsum(h)])
        spline = CubicSpline(knots, p, bc_type="not-a-knot")
        m = max(2, int(round(total / target_spacing)))
        u = np.linspace(0.0, total, m + 1)
        new = spline(u)
        new[0], new[-1] = p[0], p[-1]
        anchor = int(round(knots[curve.anchor] / total * m))
    return curve.with_points(new, anchor=anchor)


def check_embedded(curve: DiscreteCurve) -> bool:
    """True iff no two non-adjacent segments of the polyline intersect."""
    from shapely.geometry import LinearRing, LineString

    geom = LinearRing(curve.points) if curve.closed else LineString(curve.points)
    return bool(geom.is_simple)
