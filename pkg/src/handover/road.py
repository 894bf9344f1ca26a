"""Route geometry: ordered segments with lane counts, speed limits, hazard
tags and point obstacles.

A road is immutable. For the hot loops (policy rollout, plan search) it is
flattened once into plain numpy arrays (`RoadPack`) that both kernel
backends consume.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class SegmentTag(enum.Enum):
    TUNNEL = "TUNNEL"
    FOG = "FOG"
    CONSTRUCTION = "CONSTRUCTION"
    ICE = "ICE"
    SENSOR_DEAD_ZONE = "SENSOR_DEAD_ZONE"


# Bit layout shared with the kernel backends.
TAG_BITS = {
    SegmentTag.TUNNEL: 1,
    SegmentTag.FOG: 2,
    SegmentTag.CONSTRUCTION: 4,
    SegmentTag.ICE: 8,
    SegmentTag.SENSOR_DEAD_ZONE: 16,
}


@dataclass(frozen=True)
class Obstacle:
    """Point obstacle at `at` meters from the start of its segment."""

    lane: int
    at: float


@dataclass(frozen=True)
class Segment:
    length: float
    lanes: int
    speed_limit: float
    tags: frozenset[SegmentTag] = frozenset()
    obstacles: tuple[Obstacle, ...] = ()

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ValueError("segment length must be > 0")
        if self.lanes < 1:
            raise ValueError("segment needs at least one lane")
        if self.speed_limit <= 0:
            raise ValueError("speed limit must be > 0")
        for ob in self.obstacles:
            if not 0 <= ob.at < self.length:
                raise ValueError("obstacle offset outside segment")
            if not 0 <= ob.lane < self.lanes:
                raise ValueError("obstacle lane outside segment")


@dataclass(frozen=True)
class RoadPack:
    """Flat, kernel-friendly view of a road."""

    seg_end: np.ndarray      # float64, cumulative end position per segment
    seg_lanes: np.ndarray    # int64
    seg_limit: np.ndarray    # float64
    seg_tags: np.ndarray     # int64 bitmask per segment
    obs_pos: np.ndarray      # float64, absolute positions, sorted
    obs_lane: np.ndarray     # int64, parallel to obs_pos
    total_length: float


@dataclass(frozen=True)
class Road:
    segments: tuple[Segment, ...]
    _pack: RoadPack = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("road needs at least one segment")
        ends, lanes, limits, tagbits = [], [], [], []
        obstacles: list[tuple[float, int]] = []
        cursor = 0.0
        for seg in self.segments:
            for ob in seg.obstacles:
                obstacles.append((cursor + ob.at, ob.lane))
            cursor += seg.length
            ends.append(cursor)
            lanes.append(seg.lanes)
            limits.append(seg.speed_limit)
            tagbits.append(sum(TAG_BITS[t] for t in seg.tags))
        obstacles.sort()
        pack = RoadPack(
            seg_end=np.asarray(ends, dtype=np.float64),
            seg_lanes=np.asarray(lanes, dtype=np.int64),
            seg_limit=np.asarray(limits, dtype=np.float64),
            seg_tags=np.asarray(tagbits, dtype=np.int64),
            obs_pos=np.asarray([p for p, _ in obstacles], dtype=np.float64),
            obs_lane=np.asarray([l for _, l in obstacles], dtype=np.int64),
            total_length=cursor,
        )
        object.__setattr__(self, "_pack", pack)

    @property
    def total_length(self) -> float:
        return self._pack.total_length

    @property
    def pack(self) -> RoadPack:
        return self._pack

    def segment_index(self, position: float) -> int:
        """Segment containing `position`; the last segment at or past the end."""
        idx = int(np.searchsorted(self._pack.seg_end, position, side="right"))
        return min(idx, len(self.segments) - 1)

    def segment_at(self, position: float) -> Segment:
        return self.segments[self.segment_index(position)]

    def lanes_at(self, position: float) -> int:
        return int(self._pack.seg_lanes[self.segment_index(position)])

    def speed_limit_at(self, position: float) -> float:
        return float(self._pack.seg_limit[self.segment_index(position)])

    def obstacle_distance(self, position: float, lane: int) -> float | None:
        """Distance to the nearest obstacle at or ahead of `position` in `lane`."""
        best: float | None = None
        pack = self._pack
        for pos, olane in zip(pack.obs_pos, pack.obs_lane):
            if olane == lane and pos >= position:
                d = float(pos - position)
                if best is None or d < best:
                    best = d
        return best

    def span_blocked(self, lane: int, lo: float, hi: float) -> bool:
        """True when an obstacle in `lane` lies within [lo, hi]."""
        pack = self._pack
        for pos, olane in zip(pack.obs_pos, pack.obs_lane):
            if olane == lane and lo <= pos <= hi:
                return True
        return False
