"""Analytic curves and ancient flows with closed-form data.

Every :class:`AnalyticFlow` maps ``(params, t)`` to planar points with the
parameter held fixed in time, so finite differences in ``t`` give a genuine
velocity field.  Non-compact flows are sampled on truncation windows; each
flow knows how to build a window covering a ball around the origin.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .curve import DiscreteCurve, Topology

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class AnalyticFlow:
    name: str
    position: Callable[[np.ndarray, float], np.ndarray]
    valid_time: tuple[float, float]
    valid_param: tuple[float, float]
    topology: Topology
    known: dict = field(default_factory=dict)
    multiplicity: int = 1
    default_window: tuple[float, float] | None = None
    # (t, reach, spacing) -> parameter values covering B_reach(0)
    window_params: Callable[[float, float, float], np.ndarray] | None = None
    # parameter value playing the role of s = 0
    param_origin: float = 0.0
    # (t, n) -> parameters equally spaced in arclength; None when params(n) already are
    arclength_params: Callable[[float, int], np.ndarray] | None = None

    def check_time(self, t: float) -> None:
        lo, hi = self.valid_time
        if not lo < t < hi:
            raise ValueError(f"{self.name}: t={t} outside valid interval ({lo}, {hi})")

    def params(self, n: int) -> np.ndarray:
        if self.topology is Topology.CLOSED:
            lo, hi = self.valid_param
            return np.linspace(lo, hi, n, endpoint=False)
        lo, hi = self.default_window or self.valid_param
        return np.linspace(lo, hi, n)

    def uniform_params(self, t: float, n: int) -> np.ndarray:
        if self.arclength_params is None:
            return self.params(n)
        return self.arclength_params(t, n)

    def points(self, params: np.ndarray, t: float) -> np.ndarray:
        self.check_time(t)
        return self.position(np.asarray(params, dtype=float), t)

    def curve(self, t: float, n: int = 1024, params: np.ndarray | None = None) -> DiscreteCurve:
        u = self.params(n) if params is None else np.asarray(params, dtype=float)
        anchor = 0 if self.topology is Topology.CLOSED else int(np.argmin(np.abs(u - self.param_origin)))
        return DiscreteCurve(self.points(u, t), self.topology, self.multiplicity, anchor)

    def window_curve(self, t: float, reach: float, spacing: float) -> DiscreteCurve:
        """Sample covering the ball of radius ``reach`` about the origin."""
        if self.window_params is None:
            raise NotImplementedError(f"{self.name} has no window sampler")
        return self.curve(t, params=self.window_params(t, reach, spacing))


def _rotate(pts: np.ndarray, rotation: float, shift) -> np.ndarray:
    if rotation == 0.0 and shift[0] == 0.0 and shift[1] == 0.0:
        return pts
    c, s = math.cos(rotation), math.sin(rotation)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + shift[0]
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + shift[1]
    return out


def focused_grid(extent: float, windows: list[tuple[float, float]], fine: float,
                 growth: float = 0.05, coarse: float | None = None) -> np.ndarray:
    """Symmetric parameter grid on ``[-extent, extent]``.

    Spacing is ``fine`` inside the (nonnegative) ``windows`` and grows
    linearly with the distance to the nearest window outside them.
    """
    coarse = coarse if coarse is not None else max(fine, 0.05 * extent)

    def spacing(s: float) -> float:
        d = min(max(a - s, 0.0, s - b) for a, b in windows)
        return min(fine + growth * d, coarse) if d > 0 else fine

    half = [0.0]
    s = 0.0
    while s < extent:
        s = min(s + spacing(s), extent)
        half.append(s)
    half = np.array(half)
    return np.concatenate([-half[:0:-1], half])


# -- flows ---------------------------------------------------------------

def shrinking_circle(r0: float = 1.0, center=(0.0, 0.0)) -> AnalyticFlow:
    """Circle of radius ``sqrt(r0^2 - 2t)``; extinct at ``t = r0^2 / 2``."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    cx, cy = float(center[0]), float(center[1])

    def position(u, t):
        r = math.sqrt(r0 * r0 - 2.0 * t)
        return np.column_stack([cx + r * np.cos(u), cy + r * np.sin(u)])

    def window(t, reach, spacing):
        r = math.sqrt(r0 * r0 - 2.0 * t)
        n = max(64, int(math.ceil(2 * math.pi * r / spacing)))
        return np.linspace(0.0, 2 * math.pi, n, endpoint=False)

    return AnalyticFlow(
        name=f"circle:r0={r0:g}",
        position=position,
        valid_time=(-math.inf, 0.5 * r0 * r0),
        valid_param=(0.0, 2 * math.pi),
        topology=Topology.CLOSED,
        known={"entropy": math.sqrt(2 * math.pi / math.e), "total_curvature": 2 * math.pi,
               "extinction_time": 0.5 * r0 * r0, "extinction_point": (cx, cy),
               "tangent_flow": "shrinking circle", "multiplicity": 1},
        window_params=window,
    )


def circle_radius(r0: float, t: float) -> float:
    return math.sqrt(r0 * r0 - 2.0 * t)


def _gd(s: np.ndarray) -> np.ndarray:
    return 2.0 * np.arctan(np.tanh(0.5 * s))


def _log_cosh(s: np.ndarray) -> np.ndarray:
    a = np.abs(s)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def grim_reaper(rotation: float = 0.0, shift=(0.0, 0.0), window: float = 6.0) -> AnalyticFlow:
    """Translator ``y = t - log cos x`` parametrised by arclength from the tip.

    With arclength ``s`` the tip sits at ``s = 0`` and
    ``x = gd(s)``, ``y = t + log cosh s``; the angle is ``theta = x`` and the
    curvature ``kappa = sech s``.  ``rotation`` and ``shift`` act after the
    translation.
    """
    shift = (float(shift[0]), float(shift[1]))

    def position(s, t):
        pts = np.column_stack([_gd(s), t + _log_cosh(s)])
        return _rotate(pts, rotation, shift)

    def window_params(t, reach, spacing):
        # along an arm, height y corresponds to s ~ y - t + log 2
        top = reach + abs(shift[0]) + abs(shift[1]) + 2.0
        s_hi = max(top - t + math.log(2.0) + 1.0, 4.0)
        s_lo = max(-top - t + math.log(2.0) - 1.0, 0.0)
        return focused_grid(s_hi, [(0.0, 2.0), (s_lo, s_hi)], spacing)

    return AnalyticFlow(
        name=f"grimreaper:rot={rotation:g}",
        position=position,
        valid_time=(-math.inf, math.inf),
        valid_param=(-math.inf, math.inf),
        topology=Topology.OPEN,
        known={"entropy": 2.0, "entropy_attained": False, "total_curvature": math.pi,
               "tangent_flow": "line parallel to the translation direction",
               "axis_angle": (HALF_PI + rotation) % math.pi, "multiplicity": 2},
        default_window=(-window, window),
        window_params=window_params,
    )


def grim_reaper_arclength(half_width: float) -> float:
    """Arclength from the tip to ``|x| = half_width``."""
    if not 0 < half_width < HALF_PI:
        raise ValueError("grim reaper samples must satisfy |x| < pi/2")
    return math.asinh(math.tan(half_width))


def grim_reaper_curve(half_width: float = HALF_PI - 0.01, n: int = 2001, t: float = 0.0,
                      rotation: float = 0.0, shift=(0.0, 0.0)) -> DiscreteCurve:
    """Grim reaper slice truncated at ``|x| = half_width``, uniform in arclength."""
    s_max = grim_reaper_arclength(half_width)
    flow = grim_reaper(rotation, shift)
    return flow.curve(t, params=np.linspace(-s_max, s_max, n))


def grim_reaper_tall(height: float, spacing: float = 0.02, t: float = 0.0,
                     rotation: float = 0.0, shift=(0.0, 0.0)) -> DiscreteCurve:
    """Grim reaper slice truncated at the given height above the tip."""
    s_max = math.acosh(math.exp(min(height, 700.0))) if height < 700 else height + math.log(2.0)
    n = int(math.ceil(2 * s_max / spacing)) + 1
    return grim_reaper(rotation, shift).curve(t, params=np.linspace(-s_max, s_max, n))


def static_line(angle: float = 0.0, offset: float = 0.0, multiplicity: int = 1,
                half_length: float = 50.0) -> AnalyticFlow:
    """Time independent line ``{s e + offset J e}`` with ``e = (cos, sin)(angle)``."""
    e = np.array([math.cos(angle), math.sin(angle)])
    nrm = np.array([-e[1], e[0]])

    def position(s, t):
        return s[:, None] * e[None, :] + offset * nrm[None, :]

    def window_params(t, reach, spacing):
        half = reach + 1.0
        n = int(math.ceil(2 * half / spacing)) + 1
        return np.linspace(-half, half, n)

    return AnalyticFlow(
        name=f"line:angle={angle:g},offset={offset:g},mult={multiplicity}",
        position=position,
        valid_time=(-math.inf, math.inf),
        valid_param=(-math.inf, math.inf),
        topology=Topology.OPEN,
        known={"entropy": float(multiplicity), "total_curvature": 0.0,
               "tangent_flow": "itself", "axis_angle": angle % math.pi,
               "multiplicity": multiplicity},
        multiplicity=multiplicity,
        default_window=(-half_length, half_length),
        window_params=window_params,
    )


def angenent_oval() -> AnalyticFlow:
    """Ancient oval ``cos x = e^t cosh y`` for ``t < 0``.

    Writing ``a = e^t``, the substitution ``p = sin x``, ``q = sinh y`` turns
    the curve into the ellipse ``p^2 + a^2 q^2 = 1 - a^2``, which gives the
    smooth counterclockwise parametrisation used here.
    """

    def position(u, t):
        a = math.exp(t)
        b = math.sqrt(1.0 - a * a)
        return np.column_stack([np.arcsin(b * np.cos(u)), np.arcsinh(b / a * np.sin(u))])

    def arclength_params(t, n):
        u = np.linspace(0.0, 2 * math.pi, 64 * n + 1)
        p = position(u, t)
        s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(p, axis=0).T))])
        return np.interp(np.linspace(0.0, s[-1], n, endpoint=False), s, u)

    def window_params(t, reach, spacing):
        p = position(np.linspace(0.0, 2 * math.pi, 4097), t)
        length = float(np.sum(np.hypot(*np.diff(p, axis=0).T)))
        return arclength_params(t, max(256, int(math.ceil(length / spacing))))

    return AnalyticFlow(
        name="angenent",
        position=position,
        valid_time=(-math.inf, 0.0),
        valid_param=(0.0, 2 * math.pi),
        topology=Topology.CLOSED,
        known={"entropy_bound": 2.0, "total_curvature": 2 * math.pi,
               "tangent_flow": "two parallel lines (multiplicity 2)", "multiplicity": 1},
        window_params=window_params,
        arclength_params=arclength_params,
    )


# -- static curves -------------------------------------------------------

def log_spiral(a: float = 1.0, k: float = 1.0, phi_range=(0.0, 4 * math.pi),
               n: int = 4001) -> DiscreteCurve:
    """Samples of ``r = a exp(k phi)``, uniform in ``phi``."""
    if not a > 0 or k == 0:
        raise ValueError("need a > 0 and k != 0")
    lo, hi = map(float, phi_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ValueError("phi_range must be a finite increasing interval")
    phi = np.linspace(lo, hi, n)
    r = a * np.exp(k * phi)
    return DiscreteCurve(np.column_stack([r * np.cos(phi), r * np.sin(phi)]))


def log_spiral_pitch(k: float) -> float:
    return math.atan(k)


def log_spiral_annulus_length(k: float, r1: float, r2: float) -> float:
    return (r2 - r1) / abs(math.sin(log_spiral_pitch(k)))


def sine_graph(x_range=(0.0, 2 * math.pi), n: int | None = None, spacing: float = 0.01) -> DiscreteCurve:
    """Graph of ``y = sin x``, uniform in ``x``."""
    lo, hi = map(float, x_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ValueError("x_range must be a finite increasing interval")
    n = n or int(math.ceil((hi - lo) / spacing)) + 1
    x = np.linspace(lo, hi, n)
    return DiscreteCurve(np.column_stack([x, np.sin(x)]))


def perturbed_circle(amplitude: float = 0.05, mode: int = 3, n: int = 512) -> DiscreteCurve:
    phi = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    r = 1.0 + amplitude * np.cos(mode * phi)
    return DiscreteCurve(np.column_stack([r * np.cos(phi), r * np.sin(phi)]), Topology.CLOSED)


def circle_curve(r: float = 1.0, n: int = 512, center=(0.0, 0.0)) -> DiscreteCurve:
    phi = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return DiscreteCurve(np.column_stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)]),
                         Topology.CLOSED)


def segment(start=(0.0, 0.0), end=(10.0, 0.0), n: int = 64) -> DiscreteCurve:
    u = np.linspace(0.0, 1.0, n)[:, None]
    a, b = np.asarray(start, float), np.asarray(end, float)
    pts = (1.0 - u) * a + u * b
    pts[-1] = b
    return DiscreteCurve(pts)


# -- name parsing ----------------------------------------------------------

_NAME = re.compile(r"^(?P<kind>[a-z]+)(?::(?P<args>.*))?$")


def _parse_args(text: str | None) -> dict[str, float]:
    out: dict[str, float] = {}
    if not text:
        return out
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"bad catalog argument {item!r}")
        out[key.strip()] = float(val)
    return out


def parse_catalog_name(name: str) -> tuple[str, dict[str, float]]:
    m = _NAME.match(name.strip().lower())
    if not m:
        raise ValueError(f"bad catalog name {name!r}")
    return m.group("kind"), _parse_args(m.group("args"))


def flow_from_name(name: str) -> AnalyticFlow:
    """Analytic flow addressed like ``circle:r0=1`` or ``grimreaper:rot=0.7``."""
    kind, args = parse_catalog_name(name)
    if kind == "circle":
        return shrinking_circle(args.get("r0", 1.0))
    if kind == "grimreaper":
        return grim_reaper(args.get("rot", 0.0), (args.get("dx", 0.0), args.get("dy", 0.0)))
    if kind == "line":
        return static_line(args.get("angle", 0.0), args.get("offset", 0.0), int(args.get("mult", 1)))
    if kind == "angenent":
        return angenent_oval()
    raise ValueError(f"{name!r} is not an analytic flow")


def curve_from_name(name: str, t: float | None = None) -> DiscreteCurve:
    """Single curve for a catalog name (flows are sampled at ``t``)."""
    kind, args = parse_catalog_name(name)
    if kind == "logspiral":
        return log_spiral(args.get("a", 1.0), args.get("k", 1.0),
                          (args.get("phi0", 0.0), args.get("phi1", 4 * math.pi)),
                          int(args.get("n", 4001)))
    if kind == "sine":
        return sine_graph((args.get("x0", 0.0), args.get("x1", 2 * math.pi)),
                          spacing=args.get("h", 0.01))
    if kind == "perturbedcircle":
        return perturbed_circle(args.get("eps", 0.05), int(args.get("mode", 3)), int(args.get("n", 512)))
    if kind == "circle":
        n = int(args.get("n", 512))
        t0 = 0.0 if t is None else t
        return shrinking_circle(args.get("r0", 1.0)).curve(t0, n)
    if kind == "grimreaper":
        hw = args.get("hw", HALF_PI - 0.01)
        return grim_reaper_curve(hw, int(args.get("n", 2001)), 0.0 if t is None else t,
                                 args.get("rot", 0.0), (args.get("dx", 0.0), args.get("dy", 0.0)))
    if kind == "line":
        flow = static_line(args.get("angle", 0.0), args.get("offset", 0.0), int(args.get("mult", 1)),
                           half_length=0.5 * args.get("length", 100.0))
        return flow.curve(0.0, int(args.get("n", 1001)))
    if kind == "angenent":
        flow = angenent_oval()
        t0 = -1.0 if t is None else t
        return flow.window_curve(t0, 0.0, args.get("h", 0.01))
    raise ValueError(f"unknown catalog entry {name!r}")
