"""Observation-stream records and their line-delimited JSON encoding.

A stream is one header line followed by one line per frame. Depth rasters
are referenced by a PGM path relative to the stream file, or carried inline
as millimeter integers. Field names are documented in ``docs/format.md``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import pgm
from .geometry import CameraIntrinsics, DepthImage, GeometryError, RigidTransform

FORMAT_VERSION = 1
CONVENTION = "world_from_camera;optical:x-right,y-down,z-forward;quaternion:wxyz;units:m"


class StreamError(ValueError):
    """Malformed stream content; the message names the offending line."""


class StreamOrderError(StreamError):
    pass


@dataclass(frozen=True)
class Detection:
    bbox: tuple[float, float, float, float]
    confidence: float = 1.0
    # simulator ground truth (bunch index, -1 for a false positive); never serialized
    source: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class StreamHeader:
    k_color: CameraIntrinsics
    k_depth: CameraIntrinsics
    color_from_depth: RigidTransform
    configs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "type": "header",
            "version": FORMAT_VERSION,
            "convention": CONVENTION,
            "color_intrinsics": self.k_color.to_dict(),
            "depth_intrinsics": self.k_depth.to_dict(),
            "color_from_depth": self.color_from_depth.to_dict(),
            "configs": self.configs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamHeader":
        if d.get("type") != "header":
            raise StreamError("first record must have type 'header'")
        if d.get("version") != FORMAT_VERSION:
            raise StreamError(f"unsupported stream version {d.get('version')!r}")
        if d.get("convention") != CONVENTION:
            raise StreamError(f"unsupported pose convention {d.get('convention')!r}")
        return cls(
            k_color=CameraIntrinsics.from_dict(d["color_intrinsics"]),
            k_depth=CameraIntrinsics.from_dict(d["depth_intrinsics"]),
            color_from_depth=RigidTransform.from_dict(d["color_from_depth"]),
            configs=dict(d.get("configs") or {}),
        )


@dataclass(eq=False)
class FrameObservation:
    """One time step. ``depth`` is in the depth camera's raster (unregistered).

    ``depth`` may be ``None`` when the referenced raster could not be read;
    the pipeline then skips the frame.
    """

    frame_id: int
    timestamp: float
    world_from_camera: RigidTransform
    detections: list[Detection]
    depth: DepthImage | None
    depth_ref: str | None = None


def frame_to_dict(obs: FrameObservation, depth_ref: str | None = None) -> dict:
    d = {
        "type": "frame",
        "frame_id": obs.frame_id,
        "timestamp": obs.timestamp,
        "world_from_camera": obs.world_from_camera.to_dict(),
        "detections": [{"bbox": [float(c) for c in det.bbox], "confidence": float(det.confidence)} for det in obs.detections],
    }
    ref = depth_ref if depth_ref is not None else obs.depth_ref
    if ref is not None:
        d["depth"] = ref
    elif obs.depth is not None:
        mm = pgm.depth_to_mm(obs.depth)
        d["depth"] = {"width": obs.depth.width, "height": obs.depth.height, "values_mm": mm.ravel().tolist()}
    else:
        raise StreamError(f"frame {obs.frame_id} has no depth to encode")
    return d


def _frame_from_dict(d: dict, base_dir: Path) -> FrameObservation:
    if d.get("type") != "frame":
        raise StreamError(f"expected a frame record, got type {d.get('type')!r}")
    dets = []
    for det in d.get("detections", []):
        bbox = tuple(float(c) for c in det["bbox"])
        if len(bbox) != 4:
            raise StreamError("bbox needs 4 numbers (u_min, v_min, u_max, v_max)")
        conf = float(det.get("confidence", 1.0))
        if not 0.0 <= conf <= 1.0:
            raise StreamError(f"confidence {conf} outside [0, 1]")
        dets.append(Detection(bbox, conf))
    depth_field = d.get("depth")
    depth, ref = None, None
    if isinstance(depth_field, str):
        ref = depth_field
        try:
            depth = pgm.read_depth(base_dir / depth_field)
        except (OSError, pgm.PGMError, GeometryError):
            depth = None
    elif isinstance(depth_field, dict):
        w, h = int(depth_field["width"]), int(depth_field["height"])
        mm = np.asarray(depth_field["values_mm"], dtype=np.int64)
        if mm.size != w * h or np.any(mm < 0) or np.any(mm > pgm.MAX_MM):
            raise StreamError("inline depth must hold width*height integers in [0, 65535]")
        depth = pgm.mm_to_depth(mm.reshape(h, w))
    else:
        raise StreamError("frame record needs a 'depth' path or inline raster")
    return FrameObservation(
        frame_id=int(d["frame_id"]),
        timestamp=float(d.get("timestamp", 0.0)),
        world_from_camera=RigidTransform.from_dict(d["world_from_camera"]),
        detections=dets,
        depth=depth,
        depth_ref=ref,
    )


def read_stream(path: str | os.PathLike) -> tuple[StreamHeader, Iterator[FrameObservation]]:
    """Parse the header eagerly and return a lazy iterator over frames."""
    path = Path(path)
    fh = open(path, encoding="utf-8")
    lines = enumerate(fh, start=1)

    header = None
    for lineno, line in lines:
        if not line.strip():
            continue
        try:
            header = StreamHeader.from_dict(json.loads(line))
        except StreamError as exc:
            fh.close()
            raise StreamError(f"{path}:{lineno}: {exc}") from exc
        except (ValueError, KeyError, TypeError) as exc:
            fh.close()
            raise StreamError(f"{path}:{lineno}: malformed header ({exc})") from exc
        break
    if header is None:
        fh.close()
        raise StreamError(f"{path}: empty stream (no header)")

    def frames() -> Iterator[FrameObservation]:
        with fh:
            for lineno, line in lines:
                if not line.strip():
                    continue
                try:
                    yield _frame_from_dict(json.loads(line), path.parent)
                except StreamError as exc:
                    raise StreamError(f"{path}:{lineno}: {exc}") from exc
                except (ValueError, KeyError, TypeError) as exc:
                    raise StreamError(f"{path}:{lineno}: malformed frame record ({exc})") from exc

    return header, frames()


def write_stream(
    path: str | os.PathLike,
    header: StreamHeader,
    frames,
    depth_dir: str | None = "depth",
) -> None:
    """Write a stream file; depth rasters go to PGM files under ``depth_dir``.

    ``depth_dir=None`` embeds depth inline instead.
    """
    path = Path(path)
    if depth_dir is not None:
        (path.parent / depth_dir).mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header.to_dict()) + "\n")
        for obs in frames:
            ref = None
            if depth_dir is not None and obs.depth is not None:
                ref = f"{depth_dir}/{obs.frame_id:06d}.pgm"
                pgm.write_depth(path.parent / ref, obs.depth)
            fh.write(json.dumps(frame_to_dict(obs, ref)) + "\n")
