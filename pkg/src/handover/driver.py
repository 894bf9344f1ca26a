"""Scripted driver stand-in: vigilance dynamics and modality-dependent
reaction sampling, parameterized by a measured reaction-time table.

The shipped table carries per-(modality, load level, condition) latency
means and standard deviations in milliseconds plus modality preference
tallies; it is data-derived configuration, loadable from JSON.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, replace
from importlib import resources
from typing import Mapping


class Modality(enum.Enum):
    TACTILE = "TACTILE"
    AUDIO = "AUDIO"
    VISUAL = "VISUAL"


# Fixed tie-break order (also the burst rendering order).
MODALITY_ORDER = (Modality.TACTILE, Modality.AUDIO, Modality.VISUAL)


class Condition(enum.Enum):
    EASY = "EASY"
    HARD = "HARD"


class Expertise(enum.Enum):
    NOVICE = "NOVICE"
    EXPERT = "EXPERT"


class ResponseKind(enum.Enum):
    ACK = "ACK"
    TAKEOVER = "TAKEOVER"
    MISS = "MISS"


class VigilanceEvent(enum.Enum):
    NONE = "NONE"
    ALERT = "ALERT"
    TOOK_OVER = "TOOK_OVER"


MIN_LATENCY_MS = 200.0
VIGILANCE_DECAY = 0.005   # per second under automation
VIGILANCE_FLOOR = 0.2
ALERT_BOOST = 0.3
DEFAULT_MISS_FACTOR = 0.5


class MissingEntry(Exception):
    pass


class TableError(Exception):
    pass


@dataclass(frozen=True)
class DriverProfile:
    vigilance: float = 1.0
    load: int = 2
    secondary_task: bool = False
    condition: Condition = Condition.HARD
    expertise: Expertise = Expertise.NOVICE

    def __post_init__(self) -> None:
        if not 0.0 <= self.vigilance <= 1.0:
            raise ValueError("vigilance must be within [0, 1]")
        if self.load not in (1, 2, 3):
            raise ValueError("load level must be 1, 2 or 3")


@dataclass(frozen=True)
class ReactionStats:
    mean_ms: float
    std_ms: float

    def __post_init__(self) -> None:
        if self.mean_ms <= 0:
            raise ValueError("mean must be > 0")
        if self.std_ms < 0:
            raise ValueError("std must be >= 0")


@dataclass(frozen=True)
class ReactionTable:
    cells: Mapping[tuple[Modality, int, Condition], ReactionStats]
    preferences: Mapping[Modality, int]
    equal_votes: int = 0

    def stats(self, modality: Modality, load: int, condition: Condition) -> ReactionStats:
        try:
            return self.cells[(modality, load, condition)]
        except KeyError:
            raise MissingEntry(f"no entry for {modality.value}.{load}.{condition.value}")

    def mean_ms(self, modality: Modality, load: int, condition: Condition) -> float:
        return self.stats(modality, load, condition).mean_ms

    def preference(self, modality: Modality) -> int:
        return self.preferences.get(modality, 0)


def parse_reaction_table(text: str) -> ReactionTable:
    """JSON with `MODALITY.LOAD.CONDITION` -> {mean_ms, std_ms} cells plus
    a `preferences` object of per-modality scores."""
    doc = json.loads(text)
    cells: dict[tuple[Modality, int, Condition], ReactionStats] = {}
    preferences: dict[Modality, int] = {}
    equal_votes = 0
    for key, value in doc.items():
        if key == "preferences":
            for mod_name, score in value.items():
                preferences[Modality(mod_name)] = int(score)
            continue
        if key == "equal_votes":
            equal_votes = int(value)
            continue
        parts = key.split(".")
        if len(parts) != 3:
            raise TableError(f"bad cell key {key!r}, expected MODALITY.LOAD.CONDITION")
        try:
            modality = Modality(parts[0])
            load = int(parts[1])
            condition = Condition(parts[2])
        except ValueError as exc:
            raise TableError(f"bad cell key {key!r}: {exc}") from exc
        cells[(modality, load, condition)] = ReactionStats(
            mean_ms=float(value["mean_ms"]), std_ms=float(value["std_ms"]))
    return ReactionTable(cells=cells, preferences=preferences, equal_votes=equal_votes)


def default_reaction_table() -> ReactionTable:
    text = resources.files("handover.data").joinpath("reaction_table.json").read_text("utf-8")
    return parse_reaction_table(text)


@dataclass(frozen=True)
class Response:
    kind: ResponseKind
    latency_ms: float | None = None

    def __post_init__(self) -> None:
        if self.kind is ResponseKind.MISS:
            if self.latency_ms is not None:
                raise ValueError("a miss carries no latency")
        elif self.latency_ms is None or self.latency_ms < MIN_LATENCY_MS:
            raise ValueError(f"latency must be >= {MIN_LATENCY_MS} ms")


def sample_reaction(table: ReactionTable, modality: Modality, load: int,
                    condition: Condition, rng: random.Random) -> float:
    """Draw a latency in ms from Normal(mean, std) truncated below at 200 ms."""
    stats = table.stats(modality, load, condition)
    for _ in range(1000):
        value = rng.gauss(stats.mean_ms, stats.std_ms)
        if value >= MIN_LATENCY_MS:
            return value
    return MIN_LATENCY_MS   # unreachable for any sane table


def update_vigilance(profile: DriverProfile, dt: float,
                     event: VigilanceEvent) -> DriverProfile:
    """Linear decay under automation; alerts boost, taking over restores."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if event is VigilanceEvent.NONE:
        v = max(VIGILANCE_FLOOR, profile.vigilance - VIGILANCE_DECAY * dt)
    elif event is VigilanceEvent.ALERT:
        v = min(1.0, profile.vigilance + ALERT_BOOST)
    else:
        v = 1.0
    return replace(profile, vigilance=v)


def respond(profile: DriverProfile, alert: tuple[Modality, float],
            table: ReactionTable, rng: random.Random,
            miss_factor: float = DEFAULT_MISS_FACTOR) -> Response:
    """Scripted response to an alert: a miss with probability
    (1 - vigilance) * miss_factor, otherwise an acknowledgement whose latency
    is drawn from the reaction table."""
    modality, _issued_at = alert
    p_miss = (1.0 - profile.vigilance) * miss_factor
    if rng.random() < p_miss:
        return Response(ResponseKind.MISS)
    latency = sample_reaction(table, modality, profile.load, profile.condition, rng)
    return Response(ResponseKind.ACK, latency)
