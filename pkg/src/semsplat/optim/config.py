"""Training configuration: every tunable surfaced by name, JSON round-trip,
and dotted-path overrides for the CLI."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from semsplat.errors import ConfigError


@dataclass
class LearningRates:
    mean: float = 2e-3
    scale: float = 2e-3
    rotation: float = 1e-3
    opacity: float = 2e-2
    color: float = 2.5e-2
    semantic: float = 1e-3  # only used when semantic_trainable
    transform_scale: float = 1e-3
    transform_rotation: float = 1e-3
    transform_translation: float = 1e-3


@dataclass
class DensifyConfig:
    interval: int = 100
    grad_threshold: float = 2.0  # mean accumulated view-space gradient norm
    split_scale_fraction: float = 0.01  # of scene extent: clone below, split above
    split_factor: float = 1.6
    compactness_interval: int = 2000
    max_gaussians: int = 200000


@dataclass
class PruneConfig:
    interval: int = 200
    min_opacity: float = 0.3
    world_radius_fraction: float = 0.1  # of scene extent
    view_radius_fraction: float = 0.2  # of image diagonal


@dataclass
class CameraConfig:
    elevation_deg: tuple = (-10.0, 60.0)
    azimuth_deg: tuple = (-180.0, 180.0)
    fov_y_deg: float = 49.0
    distance_factor: float = 2.2
    near: float = 0.01
    far: float = 100.0


@dataclass
class ViewDescriptorConfig:
    overhead_elevation_deg: float = 60.0
    front_back_azimuth_deg: float = 45.0


@dataclass
class ScheduleConfig:
    total_steps: int = 1000
    beta_start: float = 8.5e-4
    beta_end: float = 1.2e-2
    weighting: str = "one_minus_alpha_bar"
    t_min: int = 20
    t_max: int = 980


@dataclass
class CodecConfig:
    d_h: int = 512
    d_f: int = 16
    hidden: int = 256
    epochs: int = 600
    lr: float = 3e-3
    # decoder robustness on alpha-attenuated codes (rendered features are
    # transmittance-weighted); empty tuple disables the extra terms
    attenuation_levels: tuple = (0.06, 0.12, 0.25, 0.5, 0.75)


@dataclass
class InitConfig:
    gaussians_per_object: int = 12288
    opacity: float = 0.8
    scale_factor: float = 0.75  # splat size as a fraction of the point spacing
    sampler: str = "uniform_box"  # uniform_box | grid_box | sphere_surface | ellipsoid_surface


@dataclass
class TrainConfig:
    iterations: int = 2000
    seed: int = 0
    render_size: int = 128
    local_steps: int = 1  # alternation ratio local:global
    global_steps: int = 1
    tau: float = 0.01
    background_alpha: float = 0.05
    semantic_trainable: bool = False
    checkpoint_interval: int = 0  # 0 = only at the end
    preview_interval: int = 0  # 0 = never
    lr: LearningRates = field(default_factory=LearningRates)
    densify: DensifyConfig = field(default_factory=DensifyConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    view: ViewDescriptorConfig = field(default_factory=ViewDescriptorConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    init: InitConfig = field(default_factory=InitConfig)

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.local_steps < 0 or self.global_steps < 0 or \
                (self.local_steps == 0 and self.global_steps == 0):
            raise ConfigError("alternation ratio needs a positive step count")
        if self.densify.interval <= 0 or self.prune.interval <= 0 or \
                self.densify.compactness_interval <= 0:
            raise ConfigError("intervals must be positive")
        if not 0.0 < self.prune.min_opacity < 1.0:
            raise ConfigError("prune.min_opacity must lie in (0, 1)")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc):
        def build(klass, value):
            fields = {f.name: f for f in dataclasses.fields(klass)}
            kwargs = {}
            for key, val in value.items():
                if key not in fields:
                    raise ConfigError(f"unknown config key {key!r} for {klass.__name__}")
                ftype = fields[key].type
                if dataclasses.is_dataclass(_resolve(ftype)):
                    kwargs[key] = build(_resolve(ftype), val)
                elif isinstance(val, list):
                    kwargs[key] = tuple(val)
                else:
                    kwargs[key] = val
            return klass(**kwargs)

        return build(cls, doc)

    def apply_overrides(self, overrides):
        """overrides: iterable of 'dotted.path=value' strings (values JSON)."""
        doc = self.to_dict()
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            path, raw = item.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = doc
            parts = path.split(".")
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    raise ConfigError(f"unknown config path {path!r}")
                node = node[part]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config path {path!r}")
            node[parts[-1]] = value
        return TrainConfig.from_dict(doc)


_DATACLASS_TYPES = {
    "LearningRates": LearningRates,
    "DensifyConfig": DensifyConfig,
    "PruneConfig": PruneConfig,
    "CameraConfig": CameraConfig,
    "ViewDescriptorConfig": ViewDescriptorConfig,
    "ScheduleConfig": ScheduleConfig,
    "CodecConfig": CodecConfig,
    "InitConfig": InitConfig,
}


def _resolve(ftype):
    if isinstance(ftype, str):
        return _DATACLASS_TYPES.get(ftype, str)
    return ftype


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        return TrainConfig.from_dict(json.load(fh))


def save_config(config: TrainConfig, path):
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
