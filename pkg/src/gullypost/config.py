"""Pipeline configuration: one flat ``key = value`` file, ``#`` comments."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields, replace

from gullypost.model import GullyError

ENV_VAR = "GULLYPOST_CONFIG"


class ConfigError(GullyError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # vertical scale
    p0: float = 101325.0
    baro_window: float = 2.0
    # trajectory -> unit anchors
    smooth_window: int = 11
    densify_spacing: float = 0.5
    correction_sign: int = 1
    # orthophoto -> horizontal scale
    segment_window: int = 15
    segment_bias: float = 0.15
    invert: bool = False
    centerline_spacing: float = 1.0
    centerline_knot_spacing: float = 50.0
    fragment_n_resample: int = 256
    icp_max_iter: int = 50
    icp_tol: float = 1e-6
    # smoothing
    wevg_n: int = 10
    wevg_k_density: int = 6
    wevg_include_self: bool = True
    # sections
    xsect_a: int = 2
    xsect_spacing: float = 0.05
    slope_threshold: float = 1.0
    section_every: float = 50.0
    projection_denominator: str = "squared"
    # products
    recolor_k: int = 5
    recolor_radius: float = 0.3
    dem_cell: float = 0.1
    dem_quantum: float = 0.1

    def __post_init__(self):
        positive = ("p0", "densify_spacing", "segment_bias", "centerline_spacing", "icp_tol",
                    "xsect_spacing", "slope_threshold", "section_every", "recolor_radius",
                    "dem_cell", "dem_quantum")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        at_least_one = ("fragment_n_resample", "icp_max_iter", "wevg_n", "wevg_k_density", "recolor_k")
        for name in at_least_one:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.baro_window < 0 or self.centerline_knot_spacing < 0 or self.xsect_a < 0:
            raise ConfigError("baro_window, centerline_knot_spacing and xsect_a must be >= 0")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ConfigError("smooth_window must be odd and >= 1")
        if self.segment_window < 3 or self.segment_window % 2 == 0:
            raise ConfigError("segment_window must be odd and >= 3")
        if not self.segment_bias < 1:
            raise ConfigError("segment_bias must be < 1")
        if self.correction_sign not in (1, -1):
            raise ConfigError("correction_sign must be 1 or -1")
        if self.projection_denominator not in ("squared", "literal"):
            raise ConfigError("projection_denominator must be 'squared' or 'literal'")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def with_overrides(self, pairs: dict) -> PipelineConfig:
        return replace(self, **_coerce(pairs, "override"))


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _convert(name, raw, where):
    typ = _TYPES[name]
    raw = raw.strip()
    try:
        if typ == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: bad value {raw!r} for {name} ({typ})") from None


def _coerce(pairs, where):
    out = {}
    for key, raw in pairs.items():
        if key not in _TYPES:
            raise ConfigError(f"{where}: unknown key {key!r}")
        out[key] = raw if not isinstance(raw, str) else _convert(key, raw, where)
    return out


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
        _coerce({key: value}, f"{source}:{lineno}")
    return PipelineConfig(**_coerce(pairs, source))


def load_config(path: str | None = None) -> PipelineConfig:
    """Config from ``path``, else from ``$GULLYPOST_CONFIG``, else defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return PipelineConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read(), path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def dump_config(cfg: PipelineConfig) -> str:
    return "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n" for k, v in cfg.to_dict().items())
