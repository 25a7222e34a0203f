"""Detection centroid + registered depth -> world point, with a range gate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import CameraIntrinsics, DepthImage, GeometryError, Pixel, RigidTransform, backproject, transform_point


class LocatorError(ValueError):
    pass


@dataclass(frozen=True)
class LocatorConfig:
    min_range: float = 0.5
    max_range: float = 4.5
    depth_window: int = 5

    def __post_init__(self):
        if not 0 < self.min_range < self.max_range:
            raise LocatorError("need 0 < min_range < max_range")
        if self.depth_window < 1 or self.depth_window % 2 == 0:
            raise LocatorError("depth_window must be an odd integer >= 1")


@dataclass(frozen=True, eq=False)
class LocatedDetection:
    world_point: np.ndarray
    pixel: Pixel
    depth: float
    frame_id: int = -1


class Rejection(Enum):
    NO_DEPTH = "no_depth"
    OUT_OF_RANGE = "out_of_range"


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def sample_depth(d: DepthImage, p, cfg: LocatorConfig) -> float | None:
    """Median of the valid depths in a square window centered on ``round(p)``.

    The window is clipped at the raster border. Returns ``None`` when it
    holds no valid depth.
    """
    u, v = _round_half_up(p[0]), _round_half_up(p[1])
    if not (0 <= u < d.width and 0 <= v < d.height):
        raise GeometryError(f"pixel {tuple(p)} outside {d.width}x{d.height} raster")
    h = cfg.depth_window // 2
    win = d.values[max(0, v - h) : v + h + 1, max(0, u - h) : u + h + 1]
    vals = win[win > 0.0]
    if vals.size == 0:
        return None
    return float(np.median(vals))


def locate_or_reason(
    p,
    d: DepthImage,
    k_color: CameraIntrinsics,
    world_from_camera: RigidTransform,
    cfg: LocatorConfig,
    frame_id: int = -1,
) -> LocatedDetection | Rejection:
    """Like :func:`locate` but says why a detection was rejected."""
    depth = sample_depth(d, p, cfg)
    if depth is None:
        return Rejection.NO_DEPTH
    if not cfg.min_range <= depth <= cfg.max_range:
        return Rejection.OUT_OF_RANGE
    pix = Pixel(float(p[0]), float(p[1]))
    cam = backproject(pix, depth, k_color)
    return LocatedDetection(transform_point(world_from_camera, cam), pix, depth, frame_id)


def locate(
    p,
    d: DepthImage,
    k_color: CameraIntrinsics,
    world_from_camera: RigidTransform,
    cfg: LocatorConfig,
    frame_id: int = -1,
) -> LocatedDetection | None:
    """World point for a detection centroid, or ``None`` if depth is missing or out of range."""
    res = locate_or_reason(p, d, k_color, world_from_camera, cfg, frame_id)
    return None if isinstance(res, Rejection) else res
