"""Run configuration: defaults, key-value config files and the canonical hash."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

ANALYZERS = ("length", "huisken", "theta2", "angle_range", "sturm", "extremum_paths",
             "extrema", "parallel_normals", "tc_bound", "angle_bound")

# fields that locate outputs but do not change their content
_UNHASHED = ("output_dir",)


@dataclass(frozen=True)
class RunConfig:
    command: str = ""
    input: str = ""
    # evolution
    scheme: str = "semi_implicit"
    dt: float = 1e-3
    t_end: float = 0.3
    record_stride: int = 10
    resample_ratio: float = 3.0
    # analytic sampling
    t_start: float | None = None
    t_stop: float | None = None
    n_times: int = 25
    n_samples: int = 1024
    spacing: float = 0.01
    # analyzers
    analyzers: str = "all"
    zero_tol: float = 1e-8
    slack_rate: float = 1e-3
    x0: tuple = (0.0, 0.0)
    t0: float | None = None
    center: tuple = (0.0, 0.0)
    c_values: tuple = (-0.5, 0.2, 0.7)
    collar_coeff: float = 5.0
    seed: int = 12345
    n_centers: int = 100
    center_box: float = 3.0
    n_xi: int = 50
    # rescaling
    tau_start: float = -10.0
    tau_stop: float = -5.0
    radius: float = 1.0
    eps: float = 0.05
    rescale_reach: float = 13.0
    rescale_spacing: float = 0.005
    svg: bool = True
    output_dir: str = "out"

    def hashed_fields(self) -> dict:
        """Every field that can change an output's content."""
        return {k: v for k, v in asdict(self).items() if k not in _UNHASHED}

    def canonical(self) -> str:
        return json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def selected_analyzers(self) -> tuple[str, ...]:
        if self.analyzers.strip() == "all":
            return ANALYZERS
        names = tuple(a.strip() for a in self.analyzers.split(",") if a.strip())
        unknown = [a for a in names if a not in ANALYZERS]
        if unknown:
            raise ValueError(f"unknown analyzers {unknown}; choose from {ANALYZERS}")
        return names

    def to_dict(self) -> dict:
        return asdict(self)


_DEFAULTS = RunConfig()
_KINDS = {f.name: f.type for f in fields(RunConfig)}


def coerce(name: str, text) -> object:
    """Convert a textual value to the type of field ``name``."""
    if name not in _KINDS:
        raise ValueError(f"unknown config key {name!r}")
    if not isinstance(text, str):
        return tuple(text) if isinstance(text, list) else text
    kind = _KINDS[name]
    raw = text.strip()
    if kind.startswith("float | None"):
        return None if raw.lower() in ("", "none") else float(raw)
    if kind == "float":
        return float(raw)
    if kind == "int":
        return int(raw)
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {raw!r}")
    if kind == "tuple":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    return raw


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; blank lines ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        out[key] = coerce(key, value)
    return out


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Defaults, then the config file, then explicit overrides."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for k, v in overrides.items():
        if v is not None:
            values[k] = coerce(k, v)
    cfg = replace(_DEFAULTS, **values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.scheme not in ("explicit", "semi_implicit"):
        raise ValueError(f"unknown scheme {cfg.scheme!r}")
    for name in ("dt", "t_end", "spacing", "radius", "eps", "rescale_reach", "rescale_spacing"):
        if not getattr(cfg, name) > 0:
            raise ValueError(f"{name} must be positive")
    for name in ("record_stride", "n_times", "n_samples", "n_centers", "n_xi"):
        if getattr(cfg, name) < 1:
            raise ValueError(f"{name} must be at least 1")
    for name in ("x0", "center"):
        if len(getattr(cfg, name)) != 2:
            raise ValueError(f"{name} must be a planar point 'x,y'")
    if cfg.tau_start >= cfg.tau_stop:
        raise ValueError("tau_start must be below tau_stop")
    cfg.selected_analyzers()
