"""Centroid tracker: frame-to-frame association by nearest euclidean distance.

Track ids are diagnostic only; counting happens on 3D positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import Pixel


class TrackerError(ValueError):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    max_disappeared: int = 5
    max_match_distance: float = 75.0

    def __post_init__(self):
        if self.max_disappeared < 0:
            raise TrackerError("max_disappeared must be >= 0")
        if not self.max_match_distance > 0:
            raise TrackerError("max_match_distance must be > 0")


@dataclass
class Track:
    id: int
    centroid: Pixel
    disappeared: int = 0


@dataclass
class UpdateReport:
    matched: dict[int, Pixel] = field(default_factory=dict)
    created: list[int] = field(default_factory=list)
    deregistered: list[int] = field(default_factory=list)


def centroid_of(bbox) -> Pixel:
    """Midpoint of ``(u_min, v_min, u_max, v_max)``."""
    u0, v0, u1, v1 = (float(c) for c in bbox)
    if not (u1 > u0 and v1 > v0):
        raise TrackerError(f"degenerate bounding box {tuple(bbox)}")
    return Pixel((u0 + u1) / 2.0, (v0 + v1) / 2.0)


def greedy_pairs(tracks: list[Track], centroids: list[Pixel], gate: float) -> list[tuple[int, int]]:
    """Global-greedy matching as ``(track position, centroid position)`` pairs.

    All gated pairs are ordered by (distance, track id, centroid u, centroid v,
    centroid position) and accepted greedily when both ends are still free.
    That is the same as repeatedly taking the smallest remaining distance.
    """
    cands = []
    for i, t in enumerate(tracks):
        tu, tv = t.centroid
        for j, c in enumerate(centroids):
            d = math.hypot(c[0] - tu, c[1] - tv)
            if d <= gate:
                cands.append((d, t.id, c[0], c[1], j, i))
    cands.sort()
    used_t: set[int] = set()
    used_c: set[int] = set()
    pairs = []
    for _, _, _, _, j, i in cands:
        if i in used_t or j in used_c:
            continue
        used_t.add(i)
        used_c.add(j)
        pairs.append((i, j))
    return pairs


class CentroidTracker:
    """Stateful single-writer tracker; call :meth:`update` once per frame."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: dict[int, Track] = {}
        self.next_id = 1

    def _register(self, c: Pixel) -> int:
        tid = self.next_id
        self.next_id += 1
        self.tracks[tid] = Track(tid, Pixel(float(c[0]), float(c[1])))
        return tid

    def update(self, centroids) -> UpdateReport:
        centroids = [Pixel(float(c[0]), float(c[1])) for c in centroids]
        live = sorted(self.tracks.values(), key=lambda t: t.id)
        report = UpdateReport()

        pairs = greedy_pairs(live, centroids, self.config.max_match_distance)
        matched_t = set()
        matched_c = set()
        for i, j in pairs:
            t = live[i]
            t.centroid = centroids[j]
            t.disappeared = 0
            report.matched[t.id] = centroids[j]
            matched_t.add(i)
            matched_c.add(j)

        for i, t in enumerate(live):
            if i in matched_t:
                continue
            t.disappeared += 1
            if t.disappeared > self.config.max_disappeared:
                del self.tracks[t.id]
                report.deregistered.append(t.id)

        for j, c in enumerate(centroids):
            if j not in matched_c:
                report.created.append(self._register(c))
        return report

    def __len__(self):
        return len(self.tracks)
