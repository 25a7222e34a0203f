"""Pinhole camera model, rigid transforms and depth-to-color registration.

Conventions: camera frames are optical (x right, y down, z forward), poses
are ``target_from_source`` transforms, quaternions are ``(w, x, y, z)``.
A depth of ``0.0`` marks an invalid pixel everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import _kernels


class GeometryError(ValueError):
    pass


class InvalidDepthError(GeometryError):
    pass


class BehindCameraError(GeometryError):
    pass


class Pixel(NamedTuple):
    """Continuous pixel coordinates; integer values sit on pixel centers."""

    u: float
    v: float


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("raster size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError("principal point outside raster")

    @classmethod
    def kinect(cls) -> "CameraIntrinsics":
        """640x480 Kinect-like camera used as the simulator default."""
        return cls(fx=525.0, fy=525.0, cx=319.5, cy=239.5, width=640, height=480)

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.cx, self.cy], dtype=np.float64)

    def contains(self, p: Pixel) -> bool:
        return 0 <= p[0] <= self.width - 1 and 0 <= p[1] <= self.height - 1

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _matrix_to_quat(m: np.ndarray) -> np.ndarray:
    # Shepperd's method: branch on the largest diagonal term for stability.
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return np.array(q)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation (unit quaternion, normalized on construction) plus translation.

    ``transform_point(t, q) = R q + translation``.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        n = float(np.linalg.norm(q))
        if not np.all(np.isfinite(q)) or n == 0.0:
            raise GeometryError("rotation quaternion must be finite and non-zero")
        if not np.all(np.isfinite(t)):
            raise GeometryError("translation must be finite")
        if n != 1.0:
            q = q / n
        # keep w >= 0 so equal rotations share one representation
        if q[0] < 0:
            q = -q
        q.flags.writeable = False
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, rot: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(_matrix_to_quat(np.asarray(rot, dtype=np.float64)), translation)

    @classmethod
    def from_axis_angle(cls, axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        a = np.asarray(axis, dtype=np.float64)
        a = a / np.linalg.norm(a)
        s = math.sin(angle / 2.0)
        return cls(np.array([math.cos(angle / 2.0), *(a * s)]), translation)

    @cached_property
    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix."""
        m = _quat_to_matrix(self.rotation)
        m.flags.writeable = False
        return m

    def homogeneous(self) -> np.ndarray:
        h = np.eye(4)
        h[:3, :3] = self.matrix
        h[:3, 3] = self.translation
        return h

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return RigidTransform(
            _quat_mul(self.rotation, other.rotation),
            self.matrix @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        w, x, y, z = self.rotation
        conj = np.array([w, -x, -y, -z])
        return RigidTransform(conj, -(self.matrix.T @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an ``(N, 3)`` array (or a single 3-vector)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + self.translation

    def to_dict(self) -> dict:
        return {"rotation": [float(c) for c in self.rotation], "translation": [float(c) for c in self.translation]}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        rot, trans = d["rotation"], d["translation"]
        if len(rot) != 4 or len(trans) != 3:
            raise GeometryError("rotation needs 4 components (w, x, y, z), translation 3")
        return cls(np.array(rot, dtype=np.float64), np.array(trans, dtype=np.float64))

    def __repr__(self):
        return f"RigidTransform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Row-major depth raster in meters, ``values[v, u]``; 0.0 is invalid."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise GeometryError(f"depth raster must be 2-D, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise GeometryError("depth values must be finite and non-negative (0 = invalid)")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0.0

    @classmethod
    def zeros(cls, width: int, height: int) -> "DepthImage":
        return cls(np.zeros((height, width)))


def backproject(p, depth: float, k: CameraIntrinsics) -> np.ndarray:
    """Camera-frame point seen at pixel ``p`` with range ``depth`` along z."""
    if not (math.isfinite(depth) and depth > 0):
        raise InvalidDepthError(f"depth must be positive and finite, got {depth}")
    u, v = p
    return np.array([(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth])


def project(q, k: CameraIntrinsics) -> tuple[Pixel, float]:
    """Pixel and depth of a camera-frame point. Raises for ``z <= 0``."""
    x, y, z = (float(c) for c in q)
    if not z > 0:
        raise BehindCameraError(f"point is not in front of the camera (z={z})")
    return Pixel(k.fx * x / z + k.cx, k.fy * y / z + k.cy), z


def transform_point(t: RigidTransform, q) -> np.ndarray:
    return t.matrix @ np.asarray(q, dtype=np.float64) + t.translation


@dataclass(frozen=True)
class RegistrationResult:
    image: DepthImage
    dropped: int


def register_depth(
    d: DepthImage,
    k_depth: CameraIntrinsics,
    k_color: CameraIntrinsics,
    color_from_depth: RigidTransform,
) -> RegistrationResult:
    """Warp a depth raster onto the color camera's pixel grid.

    Each valid depth pixel is back-projected, moved into the color frame and
    re-projected to the nearest color pixel. When several land on one pixel
    the nearest depth wins, so the result does not depend on traversal
    order. Pixels that land outside the color raster or behind the color
    camera are counted in ``dropped``.
    """
    if (d.width, d.height) != (k_depth.width, k_depth.height):
        raise GeometryError("depth raster size does not match depth intrinsics")
    out, dropped = _kernels.register_depth_kernel(
        d.values,
        k_depth.as_array(),
        k_color.as_array(),
        k_color.width,
        k_color.height,
        np.ascontiguousarray(color_from_depth.matrix),
        np.ascontiguousarray(color_from_depth.translation),
    )
    return RegistrationResult(DepthImage(out), int(dropped))
