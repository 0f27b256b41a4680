"""Gaussian weighted length, entropy search, total curvature and bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .curve import DiscreteCurve, GeometryField

# exponent above which a segment's Gaussian weight is treated as zero
TRUNCATION_EXPONENT = 40.0
# longest Gauss-Legendre piece, in units of sqrt(scale)
PIECE_FRACTION = 0.2

_GL = 0.5 / math.sqrt(3.0)


def _segment_ends(curve: DiscreteCurve) -> tuple[np.ndarray, np.ndarray]:
    p = curve.points
    if curve.closed:
        return p, np.roll(p, -1, axis=0)
    return p[:-1], p[1:]


def weighted_integral(curve: DiscreteCurve, center, scale: float,
                      values: np.ndarray | None = None) -> float:
    """``(4 pi scale)^(-1/2) * int f exp(-|x-x0|^2 / (4 scale)) ds``.

    ``values`` are per-sample values of f, interpolated linearly along each
    segment; ``None`` means f = 1.  Two-point Gauss-Legendre per segment.
    Segments are clipped to the disc outside of which the weight is below
    ``exp(-TRUNCATION_EXPONENT)``, and clipped parts longer than
    ``PIECE_FRACTION * sqrt(scale)`` are split so the rule resolves the
    Gaussian even on coarse polygons.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    x0 = np.asarray(center, dtype=float)
    a, b = _segment_ends(curve)
    d = b - a
    h = np.hypot(d[:, 0], d[:, 1])
    w = x0 - a
    wd = np.einsum("ij,ij->i", w, d)
    ww = np.einsum("ij,ij->i", w, w)
    dd = h * h
    disc = wd * wd - dd * (ww - 4.0 * scale * TRUNCATION_EXPONENT)
    keep = disc > 0
    root = np.sqrt(np.where(keep, disc, 0.0))
    u0 = np.clip((wd - root) / dd, 0.0, 1.0)
    u1 = np.clip((wd + root) / dd, 0.0, 1.0)
    keep &= u1 > u0
    if not np.any(keep):
        return 0.0
    a, d, h, u0, u1 = a[keep], d[keep], h[keep], u0[keep], u1[keep]
    if values is not None:
        f = np.asarray(values, dtype=float)
        fa = f if curve.closed else f[:-1]
        fb = np.roll(f, -1) if curve.closed else f[1:]
        fa, fb = fa[keep], fb[keep]
    pieces = np.maximum(1, np.ceil((u1 - u0) * h / (PIECE_FRACTION * math.sqrt(scale)))).astype(int)
    if np.any(pieces > 1):
        seg = np.repeat(np.arange(len(h)), pieces)
        k = np.arange(len(seg)) - np.repeat(np.cumsum(pieces) - pieces, pieces)
        du = (u1 - u0)[seg] / pieces[seg]
        lo = u0[seg] + k * du
        a, d, h = a[seg], d[seg], h[seg]
        if values is not None:
            fa, fb = fa[seg], fb[seg]
    else:
        du, lo = u1 - u0, u0
    total = 0.0
    for node in (0.5 - _GL, 0.5 + _GL):
        u = lo + node * du
        q = a + u[:, None] * d - x0
        wgt = np.exp(-np.einsum("ij,ij->i", q, q) / (4.0 * scale))
        if values is not None:
            wgt = wgt * ((1.0 - u) * fa + u * fb)
        total += float(np.dot(wgt, du * h))
    return curve.multiplicity * 0.5 * total / math.sqrt(4.0 * math.pi * scale)


def gaussian_length(curve: DiscreteCurve, center, scale: float) -> float:
    """Gaussian weighted length ``F_{x0, lambda}`` of the curve."""
    return weighted_integral(curve, center, scale)


@dataclass(frozen=True)
class EntropyConfig:
    """Search parameters for :func:`entropy_estimate`.

    ``center_stride`` of ``None`` picks a stride giving about
    ``target_centers`` seed centres.  Only the ``refine_top`` best seeds are
    polished by Nelder-Mead.
    """

    center_stride: int | None = None
    target_centers: int = 48
    n_scales: int = 16
    scale_range: tuple[float, float] | None = None
    refine_top: int = 12
    max_iter: int = 200
    rel_tol: float = 1e-8
    box_inflation: float = 4.0


@dataclass(frozen=True)
class EntropyResult:
    value: float
    argmax_center: tuple[float, float]
    argmax_scale: float
    evaluations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "center": list(self.argmax_center),
            "scale": self.argmax_scale,
            "evaluations": self.evaluations,
            "converged": self.converged,
        }


def default_scale_range(curve: DiscreteCurve) -> tuple[float, float]:
    return float(np.min(curve.spacings())) ** 2, (2.0 * curve.diameter()) ** 2


def entropy_estimate(curve: DiscreteCurve, config: EntropyConfig | None = None) -> EntropyResult:
    """Lower bound for the entropy by multi-start maximisation of F.

    Seeds are every k-th sample (plus the centroid) crossed with log-spaced
    scales; the best seeds are refined over ``(x, y, log scale)``.  Centres
    are confined to the bounding box inflated by ``box_inflation`` times the
    diameter, scales to ``scale_range``.
    """
    cfg = config or EntropyConfig()
    lam_lo, lam_hi = cfg.scale_range or default_scale_range(curve)
    if not (0 < lam_lo < lam_hi):
        raise ValueError(f"empty scale range [{lam_lo}, {lam_hi}]")
    log_lo, log_hi = math.log(lam_lo), math.log(lam_hi)
    diam = curve.diameter()
    box_lo = curve.points.min(axis=0) - cfg.box_inflation * diam
    box_hi = curve.points.max(axis=0) + cfg.box_inflation * diam

    evals = 0

    def clip(z):
        z = np.asarray(z, float)
        return (np.clip(z[:2], box_lo, box_hi), float(np.clip(z[2], log_lo, log_hi)))

    def value(z) -> float:
        nonlocal evals
        c, ll = clip(z)
        evals += 1
        return gaussian_length(curve, c, math.exp(ll))

    n = len(curve)
    stride = cfg.center_stride or max(1, n // cfg.target_centers)
    centers = np.vstack([curve.points[::stride], curve.points.mean(axis=0)])
    log_scales = np.linspace(log_lo, log_hi, cfg.n_scales)

    seeds = []
    for c in centers:
        for ll in log_scales:
            z = np.array([c[0], c[1], ll])
            seeds.append((value(z), z))
    seeds.sort(key=lambda item: _tie_key(item[0], item[1]))

    candidates = [(v, z, True) for v, z in seeds[: max(1, cfg.refine_top)]]
    refined = []
    for v0, z0, _ in candidates:
        step = 0.5 * math.exp(0.5 * z0[2])
        simplex = np.array([z0, z0 + [step, 0, 0], z0 + [0, step, 0], z0 + [0, 0, 0.5]])
        res = minimize(lambda z: -value(z), z0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "maxiter": cfg.max_iter,
                                "xatol": 1e-10, "fatol": cfg.rel_tol * max(abs(v0), 1e-300)})
        c, ll = clip(res.x)
        z = np.array([c[0], c[1], ll])
        v = value(z)
        if v < v0:
            z, v = z0, v0
        refined.append((v, z, bool(res.success)))

    # the reported value must beat every seed that was evaluated
    best_seed_v, best_seed_z = seeds[0]
    refined.append((best_seed_v, best_seed_z, False))
    refined.sort(key=lambda item: _tie_key(item[0], item[1]))
    v, z, ok = refined[0]
    c, ll = clip(z)
    lam = math.exp(ll)
    final = gaussian_length(curve, c, lam)
    return EntropyResult(final, (float(c[0]), float(c[1])), lam, evals + 1, ok)


def _tie_key(v: float, z: np.ndarray):
    # larger value first, then smaller scale, then lexicographic centre
    return (-v, z[2], z[0], z[1])


def scale_sup(curve: DiscreteCurve, center, scale_range: tuple[float, float],
              n_grid: int = 64) -> tuple[float, float]:
    """``sup`` over scales of F at a fixed centre: log-grid plus bounded polish."""
    from scipy.optimize import minimize_scalar

    lo, hi = math.log(scale_range[0]), math.log(scale_range[1])
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([gaussian_length(curve, center, math.exp(g)) for g in grid])
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    best_v, best_l = float(vals[k]), float(grid[k])
    if b > a:
        res = minimize_scalar(lambda g: -gaussian_length(curve, center, math.exp(g)),
                              bounds=(a, b), method="bounded", options={"xatol": 1e-9})
        if -res.fun > best_v:
            best_v, best_l = float(-res.fun), float(res.x)
    return best_v, math.exp(best_l)


def total_curvature(geometry: GeometryField) -> float:
    """Trapezoid rule for the integral of |kappa| ds."""
    k = np.abs(geometry.curvature)
    h = geometry.spacing
    if geometry.closed:
        return float(np.sum(0.5 * (k + np.roll(k, -1)) * h))
    return float(np.sum(0.5 * (k[:-1] + k[1:]) * h))


def _lifted_angles(geometry: GeometryField) -> np.ndarray:
    theta = geometry.angle
    if not geometry.closed:
        return theta
    # close the loop across the branch cut: last -> first lifted by the turning
    step = theta[0] - theta[-1]
    step -= 2.0 * math.pi * round(step / (2.0 * math.pi))
    return np.concatenate([theta, [theta[-1] + step]])


def count_angle_preimages(geometry: GeometryField, xi: float, tol: float = 1e-9) -> int:
    """Number of solutions of ``theta = xi (mod pi)`` along the curve.

    Crossings are read off the lifted residual ``(theta - xi) / pi``; a run
    of samples within ``tol`` of a solution counts as a single hit whether it
    crosses or only touches.
    """
    theta = _lifted_angles(geometry)
    v = (theta - xi) / math.pi
    near = np.abs(v - np.round(v)) <= tol / math.pi
    if geometry.closed:
        body, near_body = v[:-1], near[:-1]
        if np.all(near_body):
            return 1
        # rotate so the cyclic walk starts (and ends) off the lattice
        start = int(np.argmin(near_body))
        turn = v[-1] - v[0]
        k = np.arange(len(body)) + start
        seq = body[k % len(body)] + turn * (k >= len(body))
        v = np.concatenate([seq, [seq[0] + turn]])
        near = np.concatenate([near_body[k % len(body)], [False]])
    elif np.all(near):
        return 1
    return _count_lattice_hits(v, near)


def _count_lattice_hits(v: np.ndarray, near: np.ndarray) -> int:
    hits = 0
    last_off = None
    i, m = 0, len(v)
    while i < m:
        if not near[i]:
            if last_off is not None:
                hits += abs(math.floor(v[i]) - math.floor(v[last_off]))
            last_off = i
            i += 1
            continue
        j = i
        while j < m and near[j]:
            j += 1
        hits += 1
        if last_off is not None and j < m:
            va, vb, lattice = v[last_off], v[j], round(v[i])
            between = min(va, vb) < lattice < max(va, vb)
            hits += abs(math.floor(vb) - math.floor(va)) - int(between)
            last_off = j
            i = j + 1
        else:
            last_off = j if j < m else last_off
            i = j + 1 if j < m else j
    return hits


def total_curvature_area_formula(geometry: GeometryField, n_xi: int = 64) -> float:
    """Midpoint rule for the integral over xi in (0, pi) of the preimage count."""
    if n_xi < 8:
        raise ValueError("n_xi must be at least 8")
    xis = (np.arange(n_xi) + 0.5) * math.pi / n_xi
    return math.pi / n_xi * sum(count_angle_preimages(geometry, float(x)) for x in xis)


def entropy_bound_slope(eta: float) -> float:
    """Entropy bound for a graph whose slope is bounded by ``eta``."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return math.sqrt(1.0 + eta * eta)


def entropy_bound_total_curvature(alpha: int) -> float:
    """Entropy bound for a curve with total curvature at most ``alpha * pi``."""
    if int(alpha) != alpha or alpha < 1:
        raise ValueError("alpha must be a positive integer")
    return 4.0 * alpha * math.sqrt(2.0)


def entropy_bound_log_spiral(k: float) -> float:
    """``1/|sin(arctan k)|`` for the logarithmic spiral ``r = a exp(k phi)``."""
    if k == 0:
        raise ValueError("k must be nonzero")
    return 1.0 / abs(math.sin(math.atan(k)))


def integer_entropy(value: float, flag_distance: float = 0.2) -> tuple[int, bool]:
    """Round an entropy estimate to the integer the structure theory expects.

    Returns ``(m, flagged)`` where ``flagged`` marks estimates further than
    ``flag_distance`` from the nearest integer.
    """
    m = max(1, int(round(value)))
    return m, abs(value - round(value)) > flag_distance
