import math

import numpy as np
import pytest
from shapely.geometry import Polygon

from csflab.analyzers import heat_residual
from csflab.catalog import (angenent_oval, circle_curve, grim_reaper, grim_reaper_curve,
                            segment, shrinking_circle, sine_graph, static_line)
from csflab.curve import DiscreteCurve, Topology, compute_geometry
from csflab.flow import (EvolveControls, FlowHistory, StabilityError, analytic_history, evolve,
                         max_stable_dt, rescale_history, residual_csf, step)
from frozen import HEAT_C_PHI, HEAT_C_THETA


def mean_radius(c):
    return float(np.mean(np.hypot(*c.points.T)))


def test_explicit_step_circle():
    c = circle_curve(1.0, 128)
    new = step(c, 1e-5, "explicit")
    r0, r1 = np.hypot(*c.points.T), np.hypot(*new.points.T)
    assert np.max(np.abs((r0 - r1) - 1e-5)) <= 1e-9


@pytest.mark.parametrize("scheme, dt", [("explicit", 1e-3), ("semi_implicit", 0.05)])
def test_segment_does_not_move(scheme, dt):
    c = segment((0, 0), (10, 0), 101)
    new = step(c, dt, scheme)
    assert np.max(np.abs(new.points - c.points)) <= 1e-12


def test_semi_implicit_circle_radius():
    c = circle_curve(1.0, 512)
    for _ in range(300):
        c = step(c, 1e-3)
    assert mean_radius(c) == pytest.approx(math.sqrt(0.4), abs=1e-3)


def test_stability_bounds():
    c = circle_curve(1.0, 256)
    h = float(c.spacings().min())
    assert max_stable_dt(c, "explicit") == pytest.approx(0.4 * h * h)
    with pytest.raises(StabilityError):
        step(c, 1e-3, "explicit")
    with pytest.raises(StabilityError):
        step(c, 2 * h, "semi_implicit")
    with pytest.raises(StabilityError):
        step(c, -1.0)


def test_evolve_circle():
    hist = evolve(circle_curve(1.0, 512), 0.3, EvolveControls(dt=1e-3, record_stride=10))
    assert len(hist) > 1
    assert hist.times[-1] == pytest.approx(0.3)
    assert mean_radius(hist.slices[-1]) == pytest.approx(math.sqrt(0.4), abs=1e-3)
    assert hist.scheme_meta["status"] == "completed"


def test_evolve_sine_length_strictly_decreasing():
    hist = evolve(sine_graph((0, 2 * math.pi), spacing=0.02), 0.5, EvolveControls(dt=1e-3, record_stride=5))
    lengths = hist.lengths()
    assert np.all(np.diff(lengths) < 0)
    assert np.array_equal(hist.slices[-1].points[[0, -1]], hist.slices[0].points[[0, -1]])


def test_evolve_grim_reaper_translates():
    c = grim_reaper_curve(1.4, 561)
    hist = evolve(c, 0.2, EvolveControls(dt=5e-4, record_stride=40))
    end = hist.slices[-1]
    collar = 5 * math.sqrt(0.2)
    s = compute_geometry(end).arclength
    inside = (s > collar) & (s < s[-1] - collar)
    x, y = end.points[inside].T
    assert np.max(np.abs(y - (0.2 - np.log(np.cos(x))))) <= 1e-3


def test_evolve_singular_stop_is_status():
    hist = evolve(circle_curve(0.2, 64), 0.1, EvolveControls(dt=1e-4, record_stride=50))
    assert hist.scheme_meta["status"] == "singular"
    assert hist.times[-1] < 0.1


def test_evolve_resamples_and_records_events():
    # crowd the samples on one side so the spacing ratio trips immediately
    phi = np.concatenate([np.linspace(0, 1, 100, endpoint=False), np.linspace(1, 2 * math.pi, 40, endpoint=False)])
    c = DiscreteCurve(np.column_stack([np.cos(phi), np.sin(phi)]), Topology.CLOSED)
    hist = evolve(c, 0.01, EvolveControls(dt=1e-4))
    assert hist.scheme_meta["resample_events"]


def test_evolve_rejects_bad_controls():
    with pytest.raises(ValueError):
        evolve(circle_curve(), 0.0)
    with pytest.raises(ValueError):
        evolve(circle_curve(), 0.1, EvolveControls(scheme="rk4"))


def test_length_monotone_every_run():
    for c in (circle_curve(1.0, 256), sine_graph((0, 4 * math.pi), spacing=0.05),
              grim_reaper_curve(1.4, 281)):
        lengths = evolve(c, 0.1, EvolveControls(dt=1e-3, record_stride=1)).lengths()
        assert np.all(lengths[1:] <= lengths[:-1] * (1 + 1e-8))


def test_avoidance_two_circles():
    outer = evolve(circle_curve(1.0, 256), 0.5, EvolveControls(dt=1e-3, record_stride=1))
    inner = evolve(circle_curve(0.5, 128, (0.1, 0.0)), 0.5, EvolveControls(dt=1e-3, record_stride=1))
    steps = min(len(outer), len(inner))
    checked = 0
    for k in range(steps):
        if inner.times[k] != outer.times[k]:
            break
        pin, pout = Polygon(inner.slices[k].points), Polygon(outer.slices[k].points)
        assert pout.contains(pin)
        checked += 1
    assert checked > 50
    assert inner.scheme_meta["status"] == "singular"


def test_history_jsonl_round_trip(tmp_path):
    hist = evolve(sine_graph((0, 2 * math.pi), spacing=0.05), 0.05, EvolveControls(dt=1e-3, record_stride=10))
    path = tmp_path / "h.jsonl"
    hist.save(path)
    back = FlowHistory.load(path)
    assert np.array_equal(back.times, hist.times)
    for a, b in zip(back.slices, hist.slices):
        assert np.array_equal(a.points, b.points)
    assert back.scheme_meta["status"] == "completed"
    assert (tmp_path / "h.meta.json").exists()


def test_history_rejects_unordered_times():
    c = segment()
    with pytest.raises(ValueError):
        FlowHistory(np.array([0.0, 0.0]), (c, c))


def test_evolve_deterministic():
    a = evolve(circle_curve(1.0, 128), 0.05).to_jsonl()
    b = evolve(circle_curve(1.0, 128), 0.05).to_jsonl()
    assert a == b


def test_rescale_circle_is_sqrt2():
    flow = shrinking_circle(1.0)
    hist = analytic_history(flow, [-5.0, -1.0, 0.0, 0.3, 0.49], n=256)
    for sl in rescale_history(hist, ((0, 0), 0.5)):
        assert np.max(np.abs(np.hypot(*sl.curve.points.T) - math.sqrt(2))) <= 1e-9


def test_rescale_line_unchanged_as_set():
    hist = analytic_history(static_line(0.4), [-3.0, -1.0], n=101)
    for sl in rescale_history(hist, ((0, 0), 0.0)):
        p = sl.curve.points
        assert np.max(np.abs(p[:, 1] * math.cos(0.4) - p[:, 0] * math.sin(0.4))) <= 1e-12


def test_rescale_points_exact():
    hist = analytic_history(shrinking_circle(1.0), [-2.0, 0.1], n=64)
    x0 = np.array([0.3, -0.2])
    for sl, t, c in zip(rescale_history(hist, (x0, 0.4)), hist.times, hist.slices):
        assert sl.tau == -math.log(0.4 - t)
        assert np.array_equal(sl.curve.points, math.exp(0.5 * sl.tau) * (c.points - x0))


def test_rescale_rejects_late_slices():
    hist = analytic_history(shrinking_circle(1.0), [0.0, 0.2], n=64)
    with pytest.raises(ValueError):
        rescale_history(hist, ((0, 0), 0.2))


def test_rescaled_grim_reaper_hugs_axis():
    tau = -8.0
    t = -math.exp(-tau)
    flow = grim_reaper()
    reach = 2 * math.exp(-tau / 2)
    hist = analytic_history(flow, [t], reach=reach, spacing=0.002 * reach)
    sl = rescale_history(hist, ((0, 0), 0.0))[0]
    p = sl.curve.points
    inside = np.hypot(*p.T) <= 1.0
    assert inside.sum() > 100
    assert np.max(np.abs(p[inside, 0])) <= 0.05


def test_residuals():
    assert residual_csf(grim_reaper(), -1.0) <= 1e-6
    assert residual_csf(shrinking_circle(2.0), -1.0) <= 1e-6
    assert residual_csf(static_line(0.0), 0.0) <= 1e-12
    # a tilted line carries coordinate round-off, amplified by 1/h^2 on fine grids
    assert residual_csf(static_line(0.3), 0.0, n_samples=201) <= 1e-12
    assert residual_csf(angenent_oval(), -0.5) <= 1e-5


def test_heat_residual_theta_and_phi():
    """Both heat equations hold to ``C (dt + h^2)`` away from the pinned ends."""
    rng = np.random.default_rng(2024)
    centers = rng.uniform(-2.0, 2.0, size=(5, 2))
    for n, dt in [(561, 5e-4), (1121, 2.5e-4)]:
        c = grim_reaper_curve(1.4, n)
        hist = evolve(c, 0.1, EvolveControls(dt=dt, record_stride=1))
        h = float(np.max(c.spacings()))
        budget = dt + h * h
        worst_theta = worst_phi = 0.0
        for i in range(1, len(hist)):
            t = hist.times[i]
            if t < 0.02:
                continue
            a, b = hist.slices[i - 1], hist.slices[i]
            collar = max(0.5, 5 * math.sqrt(t))
            worst_theta = max(worst_theta, heat_residual(a, b, hist.times[i - 1], t, "theta", collar=collar))
            for x0 in centers:
                worst_phi = max(worst_phi, heat_residual(a, b, hist.times[i - 1], t, "phi",
                                                         center=x0, collar=collar))
        assert worst_theta <= HEAT_C_THETA * budget
        assert worst_phi <= HEAT_C_PHI * budget


def test_circle_convergence_order():
    errs = []
    for n, dt in [(256, 1e-3), (512, 5e-4)]:
        c = evolve(circle_curve(1.0, n), 0.3, EvolveControls(dt=dt, record_stride=1000)).slices[-1]
        errs.append(abs(mean_radius(c) - math.sqrt(0.4)))
    assert errs[0] / errs[1] >= 3.5
