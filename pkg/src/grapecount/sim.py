"""Synthetic vineyard: scene generation, camera passes and frame synthesis.

The simulator stands in for the robot, its Kinect and the detector. It places
bunch centers along straight trellis rows, drives a camera past each row, and
renders for every pose a list of bounding boxes (color camera) plus a depth
raster (depth camera). :func:`oracle_count` gives the brute-force number of
bunches that a perfect pipeline can count along a trajectory.

Random draws come from independent streams keyed by ``(seed, stream, frame)``
so changing one noise knob leaves the other draws untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import CameraIntrinsics, DepthImage, RigidTransform
from .locator import LocatorConfig
from .stream import Detection, FrameObservation

# stream ids for np.random.default_rng([seed, stream, frame])
_PLACEMENT, _POSE, _DROPOUT, _JITTER, _DEPTH, _FALSE_POS, _CONFIDENCE = range(7)

BACKGROUND_DEPTH = 10.0
# objects closer than this to the depth camera are not rendered
NEAR_CLIP = 0.05


class SceneError(ValueError):
    pass


def _rng(seed: int, stream: int, frame: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream, int(frame)])


@dataclass(frozen=True)
class Row:
    """Trellis row from ``start`` to ``end`` in the ground plane (x, y).

    Bunches hang on the side the camera passes, to the right of the
    direction ``start -> end`` when looking down from above.
    """

    start: tuple[float, float]
    end: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    @property
    def direction(self) -> np.ndarray:
        d = np.subtract(self.end, self.start)
        return d / np.linalg.norm(d)

    @property
    def normal(self) -> np.ndarray:
        """Unit ground-plane normal pointing to the camera side."""
        dx, dy = self.direction
        return np.array([dy, -dx])


def default_rows() -> list[Row]:
    return [Row((0.0, 5.0 * i), (36.0, 5.0 * i)) for i in range(3)]


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 42
    n_bunches: int = 84
    rows: tuple[Row, ...] = field(default_factory=lambda: tuple(default_rows()))
    height_range: tuple[float, float] = (1.0, 1.6)
    # spread of bunch centers across the row plane, +/- meters
    lateral_spread: float = 0.05
    # keep bunches this far from the row ends
    end_margin: float = 0.5
    # minimum mean-absolute-difference between any two centers
    min_separation: float = 0.4
    clustered: bool = False
    cylinder_width: float = 0.2
    cylinder_height: float = 0.3
    max_attempts: int = 200_000


@dataclass(frozen=True, eq=False)
class SceneTruth:
    bunches: np.ndarray
    cylinder_width: float
    cylinder_height: float
    rows: tuple[Row, ...] = ()

    def __len__(self):
        return len(self.bunches)


def generate_scene(cfg: SceneConfig | None = None) -> SceneTruth:
    """Place ``n_bunches`` centers along the rows by rejection sampling.

    Raises :class:`SceneError` if the spacing rule cannot be met within
    ``max_attempts`` draws.
    """
    cfg = cfg or SceneConfig()
    if cfg.n_bunches < 0:
        raise SceneError("n_bunches must be >= 0")
    rows = tuple(cfg.rows)
    if cfg.n_bunches and not rows:
        raise SceneError("bunches requested but no rows given")
    usable = np.array([max(r.length - 2 * cfg.end_margin, 0.0) for r in rows]) if rows else np.zeros(0)
    if cfg.n_bunches and usable.sum() <= 0:
        raise SceneError("rows are shorter than twice the end margin")

    rng = _rng(cfg.seed, _PLACEMENT)
    pts = np.empty((0, 3))
    h_lo, h_hi = cfg.height_range
    attempts = 0
    while len(pts) < cfg.n_bunches:
        if attempts >= cfg.max_attempts:
            raise SceneError(
                f"could only place {len(pts)} of {cfg.n_bunches} bunches with "
                f"separation {cfg.min_separation} after {attempts} attempts"
            )
        attempts += 1
        ri = int(rng.choice(len(rows), p=usable / usable.sum()))
        row = rows[ri]
        s = cfg.end_margin + rng.uniform(0.0, usable[ri])
        off = rng.uniform(-cfg.lateral_spread, cfg.lateral_spread)
        h = rng.uniform(h_lo, h_hi)
        xy = np.asarray(row.start) + s * row.direction + off * row.normal
        p = np.array([xy[0], xy[1], h])
        if not cfg.clustered and len(pts):
            d = np.abs(pts - p)
            if np.min((d[:, 0] + d[:, 1] + d[:, 2]) / 3) <= cfg.min_separation:
                continue
        pts = np.vstack([pts, p])
    return SceneTruth(pts, cfg.cylinder_width, cfg.cylinder_height, rows)


def camera_pose(position, forward) -> RigidTransform:
    """world_from_camera for an upright optical camera looking along ``forward``.

    ``forward`` must not be vertical; image "down" is world -z.
    """
    z = np.asarray(forward, dtype=np.float64)
    z = z / np.linalg.norm(z)
    y = np.array([0.0, 0.0, -1.0])
    y = y - np.dot(y, z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    return RigidTransform.from_matrix(np.column_stack([x, y, z]), position)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Camera passes along the trellis rows.

    ``waypoints`` overrides the automatic passes: a list of passes, each a
    list of world_from_camera poses; frames are spaced ``speed`` meters
    apart along each pass. Pose jitter is drawn per frame and applied to
    the true camera pose (the pipeline sees the jittered pose).
    """

    standoff: float = 1.5
    camera_height: float = 1.3
    speed: float = 0.2
    end_overshoot: float = 2.0
    pose_sigma_m: float = 0.03
    pose_sigma_rad: float = 0.01
    waypoints: tuple | None = None

    def nominal(self) -> "TrajectoryConfig":
        """Same path without pose jitter."""
        return TrajectoryConfig(
            self.standoff, self.camera_height, self.speed, self.end_overshoot, 0.0, 0.0, self.waypoints
        )


def _row_passes(scene: SceneTruth, cfg: TrajectoryConfig) -> list[list[RigidTransform]]:
    passes = []
    for row in scene.rows:
        n = row.normal
        forward = np.array([-n[0], -n[1], 0.0])
        ends = []
        for s in (-cfg.end_overshoot, row.length + cfg.end_overshoot):
            xy = np.asarray(row.start) + s * row.direction + cfg.standoff * n
            ends.append(camera_pose([xy[0], xy[1], cfg.camera_height], forward))
        passes.append(ends)
    return passes


def _interpolate(a: RigidTransform, b: RigidTransform, f: float) -> RigidTransform:
    qa, qb = a.rotation, b.rotation
    if np.dot(qa, qb) < 0:
        qb = -qb
    return RigidTransform((1 - f) * qa + f * qb, (1 - f) * a.translation + f * b.translation)


def trajectory_poses(scene: SceneTruth, cfg: TrajectoryConfig, seed: int = 0) -> list[RigidTransform]:
    """True world_from_camera pose for every frame, in frame order."""
    if not cfg.speed > 0:
        raise SceneError("trajectory speed must be > 0")
    passes = [list(p) for p in cfg.waypoints] if cfg.waypoints is not None else _row_passes(scene, cfg)
    poses: list[RigidTransform] = []
    for wps in passes:
        if len(wps) == 1:
            poses.append(wps[0])
            continue
        for a, b in zip(wps[:-1], wps[1:]):
            seg = float(np.linalg.norm(b.translation - a.translation))
            steps = max(1, int(math.floor(seg / cfg.speed + 1e-9)))
            for i in range(steps):
                poses.append(_interpolate(a, b, i * cfg.speed / seg if seg > 0 else 0.0))
        poses.append(wps[-1])

    if cfg.pose_sigma_m == 0 and cfg.pose_sigma_rad == 0:
        return poses
    jittered = []
    for i, p in enumerate(poses):
        rng = _rng(seed, _POSE, i)
        dt = rng.normal(0.0, cfg.pose_sigma_m, 3)
        axis = rng.normal(size=3)
        angle = rng.normal(0.0, cfg.pose_sigma_rad)
        # rotate about the camera center, expressed in the world frame
        rot = RigidTransform.from_axis_angle(axis, angle)
        jittered.append(RigidTransform(rot.compose(p).rotation, p.translation + dt))
    return jittered


@dataclass(frozen=True)
class NoiseConfig:
    pixel_sigma: float = 1.0
    depth_sigma: float = 0.01
    dropout: float = 0.1
    # probability per frame of one spurious detection on a non-bunch object
    false_positive_rate: float = 0.004
    false_positive_depth: tuple[float, float] = (1.0, 8.0)
    occlusion_radius: float = 15.0

    def __post_init__(self):
        for name in ("pixel_sigma", "depth_sigma", "occlusion_radius"):
            if getattr(self, name) < 0:
                raise SceneError(f"{name} must be >= 0")
        for name in ("dropout", "false_positive_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SceneError(f"{name} must be in [0, 1]")

    @classmethod
    def zero(cls, occlusion_radius: float = 15.0) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0, occlusion_radius=occlusion_radius)


@dataclass(frozen=True)
class CameraRig:
    k_color: CameraIntrinsics = field(default_factory=CameraIntrinsics.kinect)
    k_depth: CameraIntrinsics = field(default_factory=CameraIntrinsics.kinect)
    color_from_depth: RigidTransform = field(
        default_factory=lambda: RigidTransform(translation=[0.025, 0.0, 0.0])
    )


def _visible(cam_pts: np.ndarray, k: CameraIntrinsics, occlusion_radius: float):
    """Pixel coords and emit mask: in front, inside raster, not occluded."""
    z = cam_pts[:, 2]
    front = z > 0
    zs = np.where(front, z, 1.0)
    u = k.fx * cam_pts[:, 0] / zs + k.cx
    v = k.fy * cam_pts[:, 1] / zs + k.cy
    inside = front & (u >= 0) & (u <= k.width - 1) & (v >= 0) & (v <= k.height - 1)
    occluded = np.zeros(len(z), dtype=bool)
    idx = np.nonzero(inside)[0]
    if len(idx) and occlusion_radius > 0:
        fidx = np.nonzero(front)[0]
        du = u[idx, None] - u[None, fidx]
        dv = v[idx, None] - v[None, fidx]
        near = (du * du + dv * dv <= occlusion_radius**2) & (z[None, fidx] < z[idx, None])
        occluded[idx] = near.any(axis=1)
    return u, v, inside & ~occluded


def synthesize_frame(
    scene: SceneTruth,
    world_from_camera: RigidTransform,
    rig: CameraRig,
    noise: NoiseConfig,
    seed: int,
    frame_id: int = 0,
    timestamp: float | None = None,
) -> FrameObservation:
    """Detections (color camera) and depth raster (depth camera) for one pose."""
    kc, kd = rig.k_color, rig.k_depth
    w, h = scene.cylinder_width, scene.cylinder_height
    color_from_world = world_from_camera.inverse()

    objects = scene.bunches
    sources = np.arange(len(objects))
    fp_rng = _rng(seed, _FALSE_POS, frame_id)
    if noise.false_positive_rate > 0 and fp_rng.random() < noise.false_positive_rate:
        # the detector fires on something that is not a bunch but has real depth
        z = fp_rng.uniform(*noise.false_positive_depth)
        fu = fp_rng.uniform(0, kc.width - 1)
        fv = fp_rng.uniform(0, kc.height - 1)
        cam = np.array([(fu - kc.cx) * z / kc.fx, (fv - kc.cy) * z / kc.fy, z])
        objects = np.vstack([objects, world_from_camera.apply(cam)])
        sources = np.append(sources, -1)

    cam_pts = color_from_world.apply(objects) if len(objects) else np.empty((0, 3))
    u, v, emit = _visible(cam_pts, kc, noise.occlusion_radius)

    drop_rng = _rng(seed, _DROPOUT, frame_id)
    jit_rng = _rng(seed, _JITTER, frame_id)
    conf_rng = _rng(seed, _CONFIDENCE, frame_id)
    detections = []
    for i in np.nonzero(emit)[0]:
        z = cam_pts[i, 2]
        hw = kc.fx * (w / 2) / z
        hh = kc.fy * (h / 2) / z
        box = np.array([u[i] - hw, v[i] - hh, u[i] + hw, v[i] + hh])
        if noise.pixel_sigma > 0:
            box = box + jit_rng.normal(0.0, noise.pixel_sigma, 4)
        if noise.dropout > 0 and drop_rng.random() < noise.dropout:
            continue
        box[[0, 2]] = np.clip(box[[0, 2]], 0, kc.width - 1)
        box[[1, 3]] = np.clip(box[[1, 3]], 0, kc.height - 1)
        if not (box[2] > box[0] and box[3] > box[1]):
            continue
        conf = float(conf_rng.uniform(0.5, 1.0))
        detections.append(Detection(tuple(float(c) for c in box), conf, int(sources[i])))

    depth = render_depth(objects, world_from_camera.compose(rig.color_from_depth), kd, w)
    if noise.depth_sigma > 0:
        vals, label = depth
        hit = label >= 0
        d_rng = _rng(seed, _DEPTH, frame_id)
        vals[hit] = np.maximum(vals[hit] + d_rng.normal(0.0, noise.depth_sigma, int(hit.sum())), 1e-3)
        image = DepthImage(vals)
    else:
        image = DepthImage(depth[0])

    ts = float(frame_id) if timestamp is None else timestamp
    return FrameObservation(frame_id, ts, world_from_camera, detections, image)


def render_depth(objects: np.ndarray, world_from_depth: RigidTransform, kd: CameraIntrinsics, width: float):
    """Far-plane background with one fronto-parallel disc per object.

    Returns ``(depth values, label)``; label is the object index or -1.
    """
    zbuf = np.full((kd.height, kd.width), BACKGROUND_DEPTH)
    label = np.full((kd.height, kd.width), -1, dtype=np.int64)
    if len(objects):
        pts = world_from_depth.inverse().apply(objects)
        sel = np.nonzero((pts[:, 2] > NEAR_CLIP) & (pts[:, 2] < BACKGROUND_DEPTH))[0]
        if len(sel):
            p = pts[sel]
            us = kd.fx * p[:, 0] / p[:, 2] + kd.cx
            vs = kd.fy * p[:, 1] / p[:, 2] + kd.cy
            radii = kd.fx * (width / 2) / p[:, 2]
            _kernels.paint_discs_kernel(zbuf, label, us, vs, radii, np.ascontiguousarray(p[:, 2]), sel)
    return zbuf, label


def synthesize_run(
    scene: SceneTruth,
    poses: list[RigidTransform],
    rig: CameraRig,
    noise: NoiseConfig,
    seed: int,
):
    """Yield the frames of one pass over ``poses``."""
    for i, pose in enumerate(poses):
        yield synthesize_frame(scene, pose, rig, noise, seed, frame_id=i)


def oracle_count(
    scene: SceneTruth,
    poses: list[RigidTransform],
    k_color: CameraIntrinsics,
    locator: LocatorConfig | None = None,
    occlusion_radius: float = 15.0,
) -> int:
    """Brute-force number of bunches countable along ``poses``.

    A bunch counts when at some pose its center is in front of the color
    camera, projects inside the raster, is not occluded by a strictly nearer
    center within ``occlusion_radius`` pixels, and lies within the range
    gate. Uses none of the tracker/locator/counter code.
    """
    locator = locator or LocatorConfig()
    pts = np.asarray(scene.bunches, dtype=np.float64)
    n = len(pts)
    seen = np.zeros(n, dtype=bool)
    for pose in poses:
        rot = pose.matrix
        cam = (pts - pose.translation) @ rot  # R^T (p - t), row-wise
        for i in range(n):
            if seen[i]:
                continue
            x, y, z = cam[i]
            if not (locator.min_range <= z <= locator.max_range):
                continue
            u = k_color.fx * x / z + k_color.cx
            v = k_color.fy * y / z + k_color.cy
            if not (0 <= u <= k_color.width - 1 and 0 <= v <= k_color.height - 1):
                continue
            blocked = False
            for j in range(n):
                zj = cam[j, 2]
                if j == i or not (0 < zj < z):
                    continue
                uj = k_color.fx * cam[j, 0] / zj + k_color.cx
                vj = k_color.fy * cam[j, 1] / zj + k_color.cy
                if (uj - u) ** 2 + (vj - v) ** 2 <= occlusion_radius**2:
                    blocked = True
                    break
            if not blocked:
                seen[i] = True
    return int(seen.sum())
