"""YAML/JSON configuration for the simulator and pipeline.

Every section is optional; unknown keys are rejected so typos surface as
config errors instead of silently falling back to defaults. See
``docs/format.md`` for the layout.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

import yaml

from .counter import CounterConfig
from .geometry import CameraIntrinsics, RigidTransform
from .locator import LocatorConfig
from .pipeline import PipelineConfig
from .sim import CameraRig, NoiseConfig, Row, SceneConfig, TrajectoryConfig
from .tracker import TrackerConfig


class ConfigError(ValueError):
    pass


def _build(cls, data, where: str, **converters):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        kwargs[k] = converters[k](v) if k in converters else v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _rows(v):
    try:
        return tuple(Row(tuple(map(float, a)), tuple(map(float, b))) for a, b in v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scene.rows: each row is [[x0, y0], [x1, y1]] ({exc})") from exc


def _waypoints(v):
    if v is None:
        return None
    try:
        return tuple(tuple(RigidTransform.from_dict(p) for p in pas) for pas in v)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"trajectory.waypoints: {exc}") from exc


def _pair(v):
    return tuple(float(x) for x in v)


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rig: CameraRig = field(default_factory=CameraRig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def validate(self) -> "ExperimentConfig":
        loc = self.pipeline.locator
        if self.trajectory.waypoints is None and not loc.min_range <= self.trajectory.standoff <= loc.max_range:
            raise ConfigError(
                f"trajectory.standoff {self.trajectory.standoff} outside locator range "
                f"[{loc.min_range}, {loc.max_range}]"
            )
        return self

    def zero_noise(self) -> "ExperimentConfig":
        return dataclasses.replace(
            self,
            noise=NoiseConfig.zero(self.noise.occlusion_radius),
            trajectory=self.trajectory.nominal(),
        )


def pipeline_config_from_dict(d: dict | None) -> PipelineConfig:
    d = dict(d or {})
    unknown = set(d) - {"tracker", "locator", "counter", "min_confidence"}
    if unknown:
        raise ConfigError(f"unknown pipeline keys {sorted(unknown)}")
    return PipelineConfig(
        tracker=_build(TrackerConfig, d.get("tracker"), "tracker"),
        locator=_build(LocatorConfig, d.get("locator"), "locator"),
        counter=_build(CounterConfig, d.get("counter"), "counter"),
        min_confidence=float(d.get("min_confidence", 0.0)),
    )


def experiment_config_from_dict(d: dict | None) -> ExperimentConfig:
    d = dict(d or {})
    known = {"scene", "trajectory", "noise", "camera", "tracker", "locator", "counter", "min_confidence"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    scene = _build(SceneConfig, d.get("scene"), "scene", rows=_rows, height_range=_pair)
    traj = _build(TrajectoryConfig, d.get("trajectory"), "trajectory", waypoints=_waypoints)
    noise = _build(NoiseConfig, d.get("noise"), "noise", false_positive_depth=_pair)

    cam = dict(d.get("camera") or {})
    unknown = set(cam) - {"color", "depth", "color_from_depth"}
    if unknown:
        raise ConfigError(f"camera: unknown keys {sorted(unknown)}")
    try:
        rig = CameraRig(
            k_color=CameraIntrinsics.from_dict(cam["color"]) if "color" in cam else CameraIntrinsics.kinect(),
            k_depth=CameraIntrinsics.from_dict(cam["depth"]) if "depth" in cam else CameraIntrinsics.kinect(),
            color_from_depth=(
                RigidTransform.from_dict(cam["color_from_depth"])
                if "color_from_depth" in cam
                else CameraRig().color_from_depth
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"camera: {exc}") from exc

    pipe = pipeline_config_from_dict({k: d[k] for k in ("tracker", "locator", "counter", "min_confidence") if k in d})
    return ExperimentConfig(scene, traj, noise, rig, pipe).validate()


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    return experiment_config_from_dict(data)
