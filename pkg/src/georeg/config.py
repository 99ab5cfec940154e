"""Pipeline configuration.

One flat namespace of typed keys, loadable from a ``key = value`` text file
(``#`` comments, blank lines ignored) and overridable per key from the
command line. Unknown keys and out-of-range values are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}

_CHOICES = {
    "match_method": ("gtm", "ransac", "none"),
    "match_pre_translation": ("auto", "always", "never"),
    "match_ransac_model": ("similarity", "affine"),
    "overlay_color_by": ("elevation", "intensity"),
}


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the registration pipeline, with working defaults.

    Zero means "derive automatically" for ``lidar_resolution`` (from point
    density) and ``image_merge_distance`` (half the bandwidth).
    """

    lidar_se_size: int = 5
    lidar_min_area: float = 20.0
    lidar_resolution: float = 0.0
    lidar_ground_fallback: bool = False
    image_bandwidth: float = 8.0
    image_spatial_bandwidth: float = 0.0
    image_use_l: bool = False
    image_min_px: int = 25
    image_max_px: int = 15000
    image_filling_threshold: float = 50.0
    image_max_iterations: int = 100
    image_convergence_tol: float = 1e-3
    image_merge_distance: float = 0.0
    match_method: str = "gtm"
    match_k: int = 4
    match_pre_translation: str = "auto"
    match_ransac_model: str = "similarity"
    match_ransac_tol: float = 1.0
    match_ransac_iterations: int = 500
    match_area_ratio_tol: float = 2.0
    match_angle_tol_deg: float = 20.0
    pose_max_iterations: int = 200
    pose_convergence_tol: float = 1e-10
    overlay_color_by: str = "elevation"
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.lidar_se_size >= 3 and self.lidar_se_size % 2 == 1,
             "lidar_se_size must be odd and >= 3"),
            (self.lidar_min_area >= 0, "lidar_min_area must be >= 0"),
            (self.lidar_resolution >= 0, "lidar_resolution must be >= 0"),
            (self.image_bandwidth > 0, "image_bandwidth must be > 0"),
            (self.image_spatial_bandwidth >= 0, "image_spatial_bandwidth must be >= 0"),
            (0 <= self.image_min_px <= self.image_max_px,
             "image_min_px must be in [0, image_max_px]"),
            (0 <= self.image_filling_threshold <= 100,
             "image_filling_threshold must be in [0, 100]"),
            (self.image_max_iterations >= 1, "image_max_iterations must be >= 1"),
            (self.image_convergence_tol > 0, "image_convergence_tol must be > 0"),
            (self.image_merge_distance >= 0, "image_merge_distance must be >= 0"),
            (self.match_k >= 1, "match_k must be >= 1"),
            (self.match_ransac_tol > 0, "match_ransac_tol must be > 0"),
            (self.match_ransac_iterations >= 1, "match_ransac_iterations must be >= 1"),
            (self.match_area_ratio_tol >= 1, "match_area_ratio_tol must be >= 1"),
            (0 <= self.match_angle_tol_deg <= 90,
             "match_angle_tol_deg must be in [0, 90]"),
            (self.pose_max_iterations >= 1, "pose_max_iterations must be >= 1"),
            (self.pose_convergence_tol > 0, "pose_convergence_tol must be > 0"),
            (self.seed >= 0, "seed must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        for key, allowed in _CHOICES.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {', '.join(allowed)}")


_FIELDS = {f.name: f.type for f in fields(PipelineConfig)}


def _convert(key: str, raw: str):
    kind = _FIELDS[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into typed values; reject unknown keys."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_config(
    path: str | Path | None = None,
    overrides: dict | None = None,
) -> PipelineConfig:
    """Build a config from defaults, an optional file, then overrides.

    Override values may be strings (parsed like file values) or already
    typed.
    """
    values: dict = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from exc
        values.update(parse_config_text(text, source=str(p)))
    for key, val in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(key, val) if isinstance(val, str) else val
    return PipelineConfig(**values)
