"""Counting list with the spatial-restriction deduplication rule.

A candidate point is a relocation of an existing bunch when the mean absolute
coordinate difference to that bunch's first recorded position is within the
threshold; otherwise it is appended as a new bunch.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Literal

import numpy as np


class CounterError(ValueError):
    pass


def diff(p1, p2) -> float:
    """(|dx| + |dy| + |dz|) / 3."""
    x1, y1, z1 = (float(c) for c in p1)
    x2, y2, z2 = (float(c) for c in p2)
    return (abs(x2 - x1) + abs(y2 - y1) + abs(z2 - z1)) / 3


def threshold_from_cylinder(width: float, height: float) -> float:
    """Mean of the cylinder's extents along the three axes: (w + w + h) / 3."""
    return (2 * width + height) / 3


@dataclass(frozen=True)
class CounterConfig:
    threshold: float = 0.2
    cylinder_width: float = 0.2
    cylinder_height: float = 0.3
    # "euclidean" exists for diagnostics only
    metric: Literal["mean_abs", "euclidean"] = "mean_abs"

    def __post_init__(self):
        if not self.threshold > 0:
            raise CounterError("threshold must be > 0")
        if self.metric not in ("mean_abs", "euclidean"):
            raise CounterError(f"unknown metric {self.metric!r}")


@dataclass
class BunchRecord:
    index: int
    position: np.ndarray
    observations: int = 1


@dataclass(frozen=True)
class NewBunch:
    index: int


@dataclass(frozen=True)
class Relocated:
    index: int
    distance: float


class CountingList:
    """Append-only list of counted bunches; ``len()`` is the count."""

    def __init__(self, config: CounterConfig | None = None):
        self.config = config or CounterConfig()
        self._pos = np.empty((0, 3))
        self._records: list[BunchRecord] = []

    def distances(self, candidate) -> np.ndarray:
        delta = self._pos - np.asarray(candidate, dtype=np.float64)
        if self.config.metric == "euclidean":
            return np.sqrt(np.sum(delta * delta, axis=1))
        a = np.abs(delta)
        # same summation order as diff()
        return (a[:, 0] + a[:, 1] + a[:, 2]) / 3

    def try_add(self, candidate) -> NewBunch | Relocated:
        c = np.array(candidate, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(c)):
            raise CounterError("candidate must be finite")
        if self._records:
            dist = self.distances(c)
            # argmin returns the first minimum, i.e. the lowest index on ties
            best = int(np.argmin(dist))
            if dist[best] <= self.config.threshold:
                rec = self._records[best]
                rec.observations += 1
                return Relocated(rec.index, float(dist[best]))
        rec = BunchRecord(len(self._records) + 1, c)
        c.flags.writeable = False
        self._records.append(rec)
        self._pos = np.vstack([self._pos, c])
        return NewBunch(rec.index)

    def count(self) -> int:
        return len(self._records)

    def __len__(self):
        return len(self._records)

    @property
    def records(self) -> list[BunchRecord]:
        """Snapshot copy of the records."""
        return [BunchRecord(r.index, r.position, r.observations) for r in self._records]

    @property
    def positions(self) -> np.ndarray:
        return self._pos.copy()


def count(lst: CountingList) -> int:
    return lst.count()


def format_markers(records, radius: float) -> str:
    """One ``index x y z radius`` line per record, 9 significant digits."""
    lines = [
        f"{r.index} {r.position[0]:.9g} {r.position[1]:.9g} {r.position[2]:.9g} {radius:.9g}"
        for r in records
    ]
    return "".join(line + "\n" for line in lines)


def write_markers(path: str | os.PathLike, records, radius: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_markers(records, radius))
