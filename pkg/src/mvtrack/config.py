"""Pipeline configuration shared by every CLI stage."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from .errors import ValidationError
from .fusion import DIST_SQ_FLOOR, MERGE_RADIUS
from .metrics import DEFAULT_GATE, DEFAULT_X_LIST
from .pose_preproc import PreprocConfig
from .simulator import NoiseSpec
from .tracker import TrackerConfig

PATH_KEYS = ("points", "calibration", "detections", "gt", "tracks", "out")

# filter tuning emitted for noiseless simulations, so that smoothing does not
# pull estimates off exact measurements
NOISELESS_PIXEL_SIGMA = 1e-3
NOISELESS_WORLD_SIGMA = 1e-3


@dataclass(frozen=True)
class FusionConfig:
    radius: float = MERGE_RADIUS
    dist_sq_floor: float = DIST_SQ_FLOOR
    orientation_source: str = "detector"

    def __post_init__(self):
        if self.radius <= 0 or self.dist_sq_floor <= 0:
            raise ValueError("radius and dist_sq_floor must be positive")
        if self.orientation_source not in ("detector", "heuristic"):
            raise ValueError(f"unknown orientation_source {self.orientation_source!r}")


@dataclass(frozen=True)
class MetricsConfig:
    gate: float = DEFAULT_GATE
    areas: dict = field(default_factory=dict)  # area_id -> [xmin, ymin, xmax, ymax]
    x_list: tuple = DEFAULT_X_LIST
    count_coasted: bool = True

    def __post_init__(self):
        if self.gate <= 0:
            raise ValueError("gate must be positive")
        xs = tuple(float(x) for x in self.x_list)
        if list(xs) != sorted(xs) or len(set(xs)) != len(xs):
            raise ValueError("x_list must be strictly ascending")
        object.__setattr__(self, "x_list", xs)
        for aid, box in self.areas.items():
            if len(box) != 4 or box[0] > box[2] or box[1] > box[3]:
                raise ValueError(f"area {aid!r} must be [xmin, ymin, xmax, ymax]")


@dataclass(frozen=True)
class PipelineConfig:
    paths: dict = field(default_factory=dict)
    scenario: Union[str, dict, None] = None
    preproc: PreprocConfig = PreprocConfig()
    fusion: FusionConfig = FusionConfig()
    tracker: TrackerConfig = TrackerConfig()
    metrics: MetricsConfig = MetricsConfig()

    def path(self, key: str) -> Optional[Path]:
        p = self.paths.get(key)
        return None if p is None else Path(p)

    def to_dict(self) -> dict:
        d = {
            "paths": {k: str(self.paths[k]) for k in PATH_KEYS if self.paths.get(k) is not None},
            "preproc": asdict(self.preproc),
            "fusion": asdict(self.fusion),
            "tracker": asdict(self.tracker),
            "metrics": {**asdict(self.metrics), "x_list": list(self.metrics.x_list)},
        }
        if self.scenario is not None:
            d["scenario"] = self.scenario
        return d


def _section(cls, raw, name: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ValidationError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError(f"config section {name!r}: unknown keys {unknown}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config section {name!r}: {exc}") from exc


def config_from_dict(d: dict, base_dir: Optional[Path] = None) -> PipelineConfig:
    """Build a config; relative paths are resolved against ``base_dir``."""
    if not isinstance(d, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(d) - {"paths", "scenario", "preproc", "fusion", "tracker", "metrics"})
    if unknown:
        raise ValidationError(f"unknown config keys {unknown}")
    paths = dict(d.get("paths") or {})
    bad = sorted(set(paths) - set(PATH_KEYS))
    if bad:
        raise ValidationError(f"unknown path keys {bad}")
    if base_dir is not None:
        paths = {k: str((base_dir / v) if not Path(v).is_absolute() else Path(v)) for k, v in paths.items()}
    return PipelineConfig(
        paths=paths,
        scenario=d.get("scenario"),
        preproc=_section(PreprocConfig, d.get("preproc"), "preproc"),
        fusion=_section(FusionConfig, d.get("fusion"), "fusion"),
        tracker=_section(TrackerConfig, d.get("tracker"), "tracker"),
        metrics=_section(MetricsConfig, d.get("metrics"), "metrics"),
    )


def matched_config(noise: NoiseSpec, paths: Optional[dict] = None, scenario=None) -> PipelineConfig:
    """Default config, with near-exact measurement models when the data are noiseless."""
    cfg = PipelineConfig(paths=dict(paths or {}), scenario=scenario)
    if noise.is_noiseless:
        cfg = replace(
            cfg,
            preproc=replace(cfg.preproc, measurement_sigma=NOISELESS_PIXEL_SIGMA),
            tracker=replace(cfg.tracker, measurement_sigma=NOISELESS_WORLD_SIGMA),
        )
    return cfg
