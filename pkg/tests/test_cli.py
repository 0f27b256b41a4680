import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from csflab.cli import EXIT_ERROR, EXIT_FAIL, EXIT_INVALID, EXIT_OK, main
from csflab.config import RunConfig, load_config, parse_config_text
from csflab.curve import DiscreteCurve, save_curve
from csflab.flow import FlowHistory


def run(args, tmp_path, sub="out"):
    out = tmp_path / sub
    return main(list(args) + ["--output-dir", str(out)]), out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_evolve_circle(tmp_path, capsys):
    code, out = run(["evolve", "circle:r0=1", "--t-end", "0.3", "--dt", "1e-3"], tmp_path)
    assert code == EXIT_OK
    hist = FlowHistory.load(out / "history.jsonl")
    r = float(np.mean(np.hypot(*hist.slices[-1].points.T)))
    assert r == pytest.approx(math.sqrt(0.4), abs=1e-3)
    summary = json.loads(capsys.readouterr().out)
    assert summary["status"] == "completed"
    meta = json.loads((out / "history.meta.json").read_text())
    assert meta["config_hash"] == summary["config_hash"]
    first = json.loads((out / "history.jsonl").read_text().splitlines()[0])
    assert first["config_hash"] == summary["config_hash"]


def test_evolve_deterministic(tmp_path):
    args = ["evolve", "sine:x0=0,x1=6.283185307179586,h=0.05", "--t-end", "0.05"]
    run(args, tmp_path, "a")
    run(args, tmp_path, "b")
    for name in ("history.jsonl", "history.meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_evolve_invalid_curve(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"topology": "open", "multiplicity": 1,
                               "points": [[0, 0], [1, 0], [1, 0], [2, 0]]}))
    code, out = run(["evolve", str(bad)], tmp_path)
    assert code == EXIT_INVALID
    assert "invalid input" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_catalog_name_is_invalid(tmp_path):
    assert run(["measure", "nosuchcurve"], tmp_path)[0] == EXIT_INVALID


def test_bad_config_value_is_invalid(tmp_path):
    assert run(["evolve", "circle", "--dt", "-1"], tmp_path)[0] == EXIT_INVALID
    assert run(["evolve", "circle", "--scheme", "rk4"], tmp_path)[0] == EXIT_INVALID


def test_engine_error_exit(tmp_path, capsys):
    code, _ = run(["evolve", "circle:r0=1", "--scheme", "explicit", "--dt", "0.01", "--t-end", "0.1"],
                  tmp_path)
    # explicit steps are clamped to the stable bound, so this runs; a singular run is a status
    assert code == EXIT_OK
    # a curve file that cannot be read
    code, _ = run(["evolve", str(tmp_path / "missing.json")], tmp_path)
    assert code in (EXIT_INVALID, EXIT_ERROR)


def test_measure_logspiral(tmp_path, capsys):
    code, out = run(["measure", "logspiral:a=1,k=1"], tmp_path)
    assert code == EXIT_OK
    rep = json.loads((out / "measure.json").read_text())
    spiral = next(b for b in rep["bounds"] if b["name"] == "log_spiral")
    assert spiral["bound"] == pytest.approx(math.sqrt(2))
    assert spiral["holds"] and rep["entropy"]["value"] <= spiral["bound"]
    assert rep["config_hash"] == load_config(command="measure", input="logspiral:a=1,k=1",
                                             output_dir=str(out)).hash()


def test_measure_line_and_circle(tmp_path):
    _, out = run(["measure", "line"], tmp_path, "line")
    rep = json.loads((out / "measure.json").read_text())
    assert rep["entropy"]["value"] == pytest.approx(1.0, abs=5e-3)
    assert rep["total_curvature"] == pytest.approx(0.0, abs=1e-9)
    _, out = run(["measure", "circle:r0=1"], tmp_path, "circle")
    rep = json.loads((out / "measure.json").read_text())
    assert rep["entropy"]["value"] == pytest.approx(1.5204, abs=1e-3)
    assert rep["total_curvature"] == pytest.approx(2 * math.pi, abs=1e-3)


def test_measure_curve_file(tmp_path):
    phi = np.linspace(0, math.pi / 4, 300)
    path = tmp_path / "arc.json"
    save_curve(DiscreteCurve(np.column_stack([np.cos(phi), np.sin(phi)])), path)
    code, out = run(["measure", str(path)], tmp_path)
    assert code == EXIT_OK
    rep = json.loads((out / "measure.json").read_text())
    arc = next(b for b in rep["bounds"] if b["name"] == "quarter_arc")
    assert arc["holds"]


@pytest.mark.slow
def test_verify_grim_reaper(tmp_path, capsys):
    code, out = run(["verify", "grimreaper"], tmp_path)
    assert code == EXIT_OK
    rep = json.loads((out / "verify.json").read_text())
    assert rep["pass"]
    names = {c["name"] for c in rep["checks"]}
    assert {"length_monotone", "huisken_monotone", "theta2_monotone", "angle_range_nested",
            "extremum_paths", "extrema_n_min", "extrema_n_max", "parallel_normals",
            "total_curvature_bound", "angle_bound"} <= names
    rows = read_csv(out / "verify.csv")
    assert list(rows[0]) == ["t", "check_name", "value", "bound", "pass", "config_hash"]
    assert all(r["pass"] == "true" for r in rows)


def test_verify_circle_huisken_constant(tmp_path):
    code, out = run(["verify", "circle:r0=1", "--x0", "0,0", "--t0", "0.5"], tmp_path)
    assert code == EXIT_OK
    rep = json.loads((out / "verify.json").read_text())
    const = next(c for c in rep["checks"] if c["name"] == "huisken_constant")
    assert const["pass"]
    # values are deviations from the self-shrinker constant
    assert const["bound"] == 1e-4 and max(const["values"]) <= 1e-4


def test_verify_corrupted_history_fails(tmp_path, capsys):
    code, out = run(["evolve", "sine:x0=0,x1=12.566370614359172,h=0.05", "--t-end", "0.2",
                     "--record-stride", "5"], tmp_path, "evolve")
    assert code == EXIT_OK
    hist = FlowHistory.load(out / "history.jsonl")
    slices = list(hist.slices)
    slices[20] = slices[20].transformed(scale=2.0)
    bad = FlowHistory(hist.times, tuple(slices), hist.scheme_meta)
    bad_path = tmp_path / "bad.jsonl"
    bad.save(bad_path)
    capsys.readouterr()
    code, vout = run(["verify", str(bad_path), "--analyzers", "length"], tmp_path, "verify")
    assert code == EXIT_FAIL
    err = capsys.readouterr().err
    assert "length_monotone" in err and "index 20" in err
    rep = json.loads((vout / "verify.json").read_text())
    check = next(c for c in rep["checks"] if c["name"] == "length_monotone")
    assert not check["pass"] and check["first_violation"] == 20


def test_verify_exit_is_and_of_flags(tmp_path):
    _, out = run(["evolve", "sine:x0=0,x1=12.566370614359172,h=0.05", "--t-end", "0.1"], tmp_path, "ev")
    code, vout = run(["verify", str(out / "history.jsonl")], tmp_path, "v")
    rep = json.loads((vout / "verify.json").read_text())
    assert (code == EXIT_OK) == all(c["pass"] for c in rep["checks"]) == rep["pass"]


def test_rescale_grim_reaper(tmp_path, capsys):
    code, out = run(["rescale", "grimreaper"], tmp_path)
    assert code == EXIT_OK
    rows = read_csv(out / "rescale.csv")
    assert len(rows) >= 5
    good = [r for r in rows if r["graphical"] == "true"]
    assert good
    for r in good:
        assert abs(float(r["axis_angle"]) - math.pi / 2) <= 1e-3
    summary = json.loads(capsys.readouterr().out)
    assert summary["converged"]
    svg = (out / "rescale.svg").read_text()
    assert summary["config_hash"] in svg


def test_rescale_line_and_circle(tmp_path):
    _, out = run(["rescale", "line"], tmp_path, "line")
    assert {r["n_sheets"] for r in read_csv(out / "rescale.csv")} == {"1"}
    _, out = run(["rescale", "circle:r0=1"], tmp_path, "circle")
    for r in read_csv(out / "rescale.csv"):
        assert abs(float(r["radius"]) - math.sqrt(2)) <= 1e-9


def test_rescale_rejects_origin_inside_history(tmp_path):
    _, out = run(["evolve", "circle:r0=1", "--t-end", "0.1"], tmp_path, "ev")
    code, _ = run(["rescale", str(out / "history.jsonl"), "--t0", "0.05"], tmp_path, "rs")
    assert code == EXIT_INVALID


def test_report(tmp_path, capsys):
    _, out = run(["evolve", "circle:r0=1", "--t-end", "0.1"], tmp_path, "ev")
    code, rout = run(["report", str(out / "history.jsonl")], tmp_path, "rp")
    assert code == EXIT_OK
    text = (rout / "series.csv").read_text()
    assert "\r" not in text
    rows = read_csv(rout / "series.csv")
    lengths = [float(r["length"]) for r in rows]
    assert all(b <= a for a, b in zip(lengths, lengths[1:]))
    assert (rout / "slices.svg").exists()


def test_config_file_and_hash(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# comment\ndt = 5e-4\nx0 = 1, 2\nsvg = false\n")
    cfg = load_config(cfg_path, command="evolve", input="circle")
    assert cfg.dt == 5e-4 and cfg.x0 == (1.0, 2.0) and cfg.svg is False
    same = load_config(cfg_path, command="evolve", input="circle", output_dir="elsewhere")
    assert cfg.hash() == same.hash()
    assert cfg.hash() != RunConfig(command="evolve", input="circle").hash()
    with pytest.raises(ValueError):
        parse_config_text("nosuchkey = 1")
    with pytest.raises(ValueError):
        parse_config_text("dt 1")


def test_config_file_via_cli(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("t_end = 0.02\nrecord_stride = 5\n")
    code, out = run(["evolve", "circle:r0=1", "--config", str(cfg_path)], tmp_path)
    assert code == EXIT_OK
    meta = json.loads((out / "history.meta.json").read_text())
    assert meta["config"]["t_end"] == 0.02


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "csflab.cli", "measure", "line",
                          "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["entropy"]["value"] == pytest.approx(1.0, abs=5e-3)
