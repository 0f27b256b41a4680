"""Independent oracles for derived reference values.

Nothing here imports the package: every value comes from closed forms or
adaptive quadrature on the analytic curve.  ``python tests/oracles.py``
prints the table frozen in ``tests/frozen.py``.
"""

from __future__ import annotations

import math

import mpmath as mp
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

mp.mp.dps = 30


def circle_F(r: float, lam: float) -> float:
    return r * math.sqrt(math.pi / lam) * math.exp(-r * r / (4 * lam))


def grim_reaper_F(Y: float, lam: float) -> float:
    """F at centre (0, Y) on the complete grim reaper ``y = -log cos x``.

    Parametrised by arclength s: x = gd(s), y = log cosh s.
    """
    def integrand(s):
        x = 2 * mp.atan(mp.tanh(s / 2))
        y = mp.log(mp.cosh(s))
        return mp.exp(-(x * x + (y - Y) ** 2) / (4 * lam))
    s_peak = float(mp.acosh(mp.e ** Y)) if Y > 0 else 0.0
    width = 12 * math.sqrt(lam) + 5
    pts = sorted({0.0, max(s_peak - width, 0.0), s_peak, s_peak + width})
    total = 2 * mp.quad(integrand, pts + [mp.inf])
    return float(total / mp.sqrt(4 * mp.pi * lam))


def grim_reaper_sup(Y: float) -> tuple[float, float]:
    res = minimize_scalar(lambda g: -grim_reaper_F(Y, math.exp(g)), bounds=(-6, math.log(4 * Y * Y + 50)),
                          method="bounded", options={"xatol": 1e-8})
    return -res.fun, math.exp(res.x)


def grim_reaper_truncated_sup(half_width: float) -> float:
    """sup of F over axis centres and scales for the truncation at ``|x| = half_width``."""
    from scipy.optimize import minimize

    s_max = float(mp.acosh(1 / mp.cos(half_width)))

    def F(Y, lam):
        f = lambda s: mp.exp(-((2 * mp.atan(mp.tanh(s / 2))) ** 2 + (mp.log(mp.cosh(s)) - Y) ** 2) / (4 * lam))
        s_peak = min(float(mp.acosh(mp.e ** Y)) if Y > 0 else 0.0, s_max)
        return float(2 * mp.quad(f, [0, s_peak, s_max]) / mp.sqrt(4 * mp.pi * lam))

    res = minimize(lambda z: -F(z[0], math.exp(z[1])), [4.0, 1.3], method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-12})
    return float(-res.fun)


def grim_reaper_tc(a: float) -> float:
    # theta(x) = x, so the integral of |kappa| ds over |x| <= a is 2a; checked by quadrature
    val, _ = quad(lambda x: math.cos(x) / math.cos(x), -a, a)
    return val


def grim_reaper_arclength(a: float) -> float:
    val, _ = quad(lambda x: 1 / math.cos(x), -a, a, limit=200)
    return val


def sine_tc_period() -> float:
    val, _ = quad(lambda x: abs(math.sin(x)) / (1 + math.cos(x) ** 2), 0, 2 * math.pi, points=[math.pi])
    return val


def sine_tc_quarter() -> float:
    val, _ = quad(lambda x: math.sin(x) / (1 + math.cos(x) ** 2), 0, math.pi / 2)
    return val


def log_spiral_arclength(k: float, r1: float, r2: float) -> float:
    # r = e^{k phi}: ds = sqrt(r^2 + r'^2) dphi
    p1, p2 = math.log(r1) / k, math.log(r2) / k
    val, _ = quad(lambda p: math.exp(k * p) * math.sqrt(1 + k * k), p1, p2)
    return val


def angenent_offset(t: float, y: float) -> float:
    """Horizontal gap between the oval at height y and the line x = pi/2."""
    return math.pi / 2 - math.acos(math.exp(t) * math.cosh(y))


def circle_min_phi(r0: float, c: float, t: float) -> float:
    r = math.sqrt(r0 * r0 - 2 * t)
    return (r - c) ** 2 + 2 * t


def grim_reaper_distance_extrema(Y: float) -> tuple[int, int]:
    """Brute-force extrema count of |gamma(x) - (0, Y)|^2 on a fine x grid."""
    n = 200001
    xs = [-(math.pi / 2 - 1e-6) + i * (math.pi - 2e-6) / (n - 1) for i in range(n)]
    f = [x * x + (-math.log(math.cos(x)) - Y) ** 2 for x in xs]
    mins = sum(1 for i in range(1, n - 1) if f[i] < f[i - 1] and f[i] < f[i + 1])
    maxs = sum(1 for i in range(1, n - 1) if f[i] > f[i - 1] and f[i] > f[i + 1])
    return mins, maxs


if __name__ == "__main__":
    print("circle F(1, 0.5) =", repr(circle_F(1, 0.5)))
    print("circle F(1, 1)   =", repr(circle_F(1, 1.0)))
    for Y in (5, 10, 20, 50, 100):
        print(f"grim reaper sup F at (0,{Y}) =", grim_reaper_sup(Y))
    print("grim reaper truncated sup (pi/2 - 1e-4) =", repr(grim_reaper_truncated_sup(math.pi / 2 - 1e-4)))
    print("grim reaper tc(pi/2 - 0.01) =", repr(grim_reaper_tc(math.pi / 2 - 0.01)))
    print("grim reaper length(1.4) =", repr(grim_reaper_arclength(1.4)))
    print("sine tc period =", repr(sine_tc_period()), "quarter =", repr(sine_tc_quarter()))
    print("log spiral length (1,5) =", repr(log_spiral_arclength(1.0, 1.0, 5.0)))
    print("angenent offset t=-5,y=3 =", repr(angenent_offset(-5, 3)), " t=-8:", repr(angenent_offset(-8, 3)))
    print("grim reaper extrema (0,5) =", grim_reaper_distance_extrema(5.0))
