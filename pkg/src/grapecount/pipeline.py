"""Per-frame orchestration: detections -> tracker -> locator -> counting list."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .counter import BunchRecord, CounterConfig, CountingList, NewBunch
from .geometry import register_depth
from .locator import LocatorConfig, Rejection, locate_or_reason
from .stream import FrameObservation, StreamHeader, StreamOrderError, read_stream
from .tracker import CentroidTracker, TrackerConfig, centroid_of

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    locator: LocatorConfig = field(default_factory=LocatorConfig)
    counter: CounterConfig = field(default_factory=CounterConfig)
    min_confidence: float = 0.0

    def to_dict(self) -> dict:
        return {
            "tracker": dataclasses.asdict(self.tracker),
            "locator": dataclasses.asdict(self.locator),
            "counter": dataclasses.asdict(self.counter),
            "min_confidence": self.min_confidence,
        }


@dataclass
class FrameStats:
    frame_id: int
    detections: int = 0
    located: int = 0
    new: int = 0
    relocated: int = 0
    rejected_range: int = 0
    rejected_no_depth: int = 0
    # below --min-confidence or degenerate after clamping; not part of `detections`
    filtered: int = 0
    tracks_created: int = 0
    tracks_deregistered: int = 0
    registration_dropped: int = 0
    skipped: bool = False


class Pipeline:
    """Mutable processing state for one observation stream."""

    def __init__(self, header: StreamHeader, config: PipelineConfig | None = None):
        self.header = header
        self.config = config or PipelineConfig()
        self.tracker = CentroidTracker(self.config.tracker)
        self.counting = CountingList(self.config.counter)
        self.last_frame_id: int | None = None
        self.frame_stats: list[FrameStats] = []

    def _clamped_boxes(self, obs: FrameObservation, stats: FrameStats):
        k = self.header.k_color
        boxes = []
        for det in obs.detections:
            if det.confidence < self.config.min_confidence:
                stats.filtered += 1
                continue
            u0, v0, u1, v1 = det.bbox
            u0, u1 = min(max(u0, 0.0), k.width - 1), min(max(u1, 0.0), k.width - 1)
            v0, v1 = min(max(v0, 0.0), k.height - 1), min(max(v1, 0.0), k.height - 1)
            if not (u1 > u0 and v1 > v0):
                stats.filtered += 1
                continue
            boxes.append((u0, v0, u1, v1))
        return boxes

    def process_frame(self, obs: FrameObservation) -> FrameStats:
        if self.last_frame_id is not None and obs.frame_id <= self.last_frame_id:
            raise StreamOrderError(f"frame {obs.frame_id} arrived after frame {self.last_frame_id}")
        self.last_frame_id = obs.frame_id
        stats = FrameStats(obs.frame_id)
        self.frame_stats.append(stats)

        if obs.depth is None:
            log.warning("frame %d: depth unreadable (%s), skipped", obs.frame_id, obs.depth_ref)
            stats.skipped = True
            return stats

        boxes = self._clamped_boxes(obs, stats)
        centroids = [centroid_of(b) for b in boxes]
        rep = self.tracker.update(centroids)
        stats.tracks_created = len(rep.created)
        stats.tracks_deregistered = len(rep.deregistered)
        if not centroids:
            return stats

        reg = register_depth(obs.depth, self.header.k_depth, self.header.k_color, self.header.color_from_depth)
        stats.registration_dropped = reg.dropped
        for c in centroids:
            stats.detections += 1
            res = locate_or_reason(
                c, reg.image, self.header.k_color, obs.world_from_camera, self.config.locator, obs.frame_id
            )
            if res is Rejection.NO_DEPTH:
                stats.rejected_no_depth += 1
                continue
            if res is Rejection.OUT_OF_RANGE:
                stats.rejected_range += 1
                continue
            stats.located += 1
            if isinstance(self.counting.try_add(res.world_point), NewBunch):
                stats.new += 1
            else:
                stats.relocated += 1
        return stats

    def report(self, seed: int | None = None) -> "CountReport":
        return CountReport(
            count=self.counting.count(),
            records=self.counting.records,
            frame_stats=list(self.frame_stats),
            config=self.config.to_dict(),
            seed=seed,
        )


def process_frame(state: Pipeline, obs: FrameObservation) -> FrameStats:
    return state.process_frame(obs)


@dataclass
class CountReport:
    count: int
    records: list[BunchRecord]
    frame_stats: list[FrameStats]
    config: dict
    seed: int | None = None

    def totals(self) -> dict:
        keys = ("detections", "located", "new", "relocated", "rejected_range", "rejected_no_depth", "filtered")
        out = {k: sum(getattr(s, k) for s in self.frame_stats) for k in keys}
        out["frames"] = len(self.frame_stats)
        out["skipped_frames"] = sum(s.skipped for s in self.frame_stats)
        return out

    def to_dict(self, frame_stats: bool = True) -> dict:
        d = {
            "count": self.count,
            "seed": self.seed,
            "records": [
                {"index": r.index, "position": [float(c) for c in r.position], "observations": r.observations}
                for r in self.records
            ],
            "totals": self.totals(),
            "config": self.config,
        }
        if frame_stats:
            d["frame_stats"] = [dataclasses.asdict(s) for s in self.frame_stats]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CountReport":
        import numpy as np

        records = [
            BunchRecord(int(r["index"]), np.array(r["position"], dtype=np.float64), int(r["observations"]))
            for r in d["records"]
        ]
        stats = [FrameStats(**s) for s in d.get("frame_stats", [])]
        return cls(int(d["count"]), records, stats, dict(d.get("config", {})), d.get("seed"))


def dumps(obj: dict) -> str:
    """Stable JSON text used for every report file."""
    return json.dumps(obj, indent=2) + "\n"


def process_stream(source, config: PipelineConfig | None = None, header: StreamHeader | None = None) -> CountReport:
    """Fold :meth:`Pipeline.process_frame` over a stream.

    ``source`` is a stream file path, or an iterable of frames together
    with ``header``.
    """
    if isinstance(source, (str, os.PathLike)):
        header, frames = read_stream(source)
    else:
        if header is None:
            raise ValueError("an in-memory frame source needs a header")
        frames = source
    pipe = Pipeline(header, config)
    for obs in frames:
        pipe.process_frame(obs)
    return pipe.report()


@dataclass
class RunSummary:
    counts: list[int]
    base_seed: int
    reports: list[CountReport] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return sum(self.counts) / len(self.counts)

    def to_dict(self) -> dict:
        return {
            "runs": len(self.counts),
            "base_seed": self.base_seed,
            "counts": list(self.counts),
            "mean": self.mean,
            "reports": [r.to_dict(frame_stats=False) for r in self.reports],
        }


def _single_run(args) -> CountReport:
    from . import sim

    exp, seed = args
    scene = sim.generate_scene(exp.scene)
    poses = sim.trajectory_poses(scene, exp.trajectory, seed)
    frames = sim.synthesize_run(scene, poses, exp.rig, exp.noise, seed)
    header = StreamHeader(exp.rig.k_color, exp.rig.k_depth, exp.rig.color_from_depth)
    rep = process_stream(frames, exp.pipeline, header)
    rep.seed = seed
    return rep


def run_experiment(exp, n_runs: int, base_seed: int, workers: int = 1) -> RunSummary:
    """Independent simulated passes over one scene, seeds ``base_seed + i``."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    jobs = [(exp, base_seed + i) for i in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_single_run, jobs))
    else:
        reports = [_single_run(j) for j in jobs]
    return RunSummary([r.count for r in reports], base_seed, reports)
