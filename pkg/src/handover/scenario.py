"""Declarative scenario files: route, hazards, driver profile, seed.

The on-disk format is a UTF-8 JSON object; see `parse_scenario`.
Serialization is canonical (sorted keys, floats at up to 6 significant
digits) so equal scenarios produce identical bytes and fixtures diff
cleanly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .driver import Condition, DriverProfile
from .road import Obstacle, Road, Segment, SegmentTag
from .world import Mode, SimParams, WorldState

DEFAULT_HORIZON = 30
DEFAULT_DT = 1.0

_TOP_KEYS = {"name", "cruise_speed", "horizon", "seed", "dt", "initial",
             "driver", "segments"}
_INITIAL_KEYS = {"position", "lane", "speed", "sensor_health"}
_DRIVER_KEYS = {"vigilance", "load", "secondary_task", "condition"}
_SEGMENT_KEYS = {"length", "lanes", "speed_limit", "tags", "obstacles"}
_OBSTACLE_KEYS = {"lane", "at"}


class ScenarioSyntaxError(Exception):
    """Malformed scenario document (not valid JSON)."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(Exception):
    """Structurally valid JSON with invalid content; names the field path."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Scenario:
    name: str
    cruise_speed: float
    initial: WorldState
    road: Road
    driver: DriverProfile = field(default_factory=DriverProfile)
    seed: int = 0
    horizon: int = DEFAULT_HORIZON
    dt: float = DEFAULT_DT

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def params(self, **overrides) -> SimParams:
        base = dict(dt=self.dt, cruise_speed=self.cruise_speed)
        base.update(overrides)
        return SimParams(**base)


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ValidationError("missing required field", f"{path}.{key}" if path else key)
    return doc[key]


def _check_keys(doc: dict, allowed: set[str], path: str) -> None:
    for key in doc:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ValidationError("unknown field", where)


def _number(value, path: str, *, minimum: float | None = None,
            strict_min: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", path)
    out = float(value)
    if not math.isfinite(out):
        raise ValidationError("must be finite", path)
    if minimum is not None:
        if strict_min and out <= minimum:
            raise ValidationError(f"must be > {minimum}", path)
        if not strict_min and out < minimum:
            raise ValidationError(f"must be >= {minimum}", path)
    return out


def _integer(value, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"expected an integer, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise ValidationError(f"must be >= {minimum}", path)
    return value


def parse_scenario(data: bytes | str) -> Scenario:
    """Parse and fully validate a scenario document.

    Raises ScenarioSyntaxError for malformed JSON (with position) and
    ValidationError naming the offending field path for invalid content.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioSyntaxError(f"not UTF-8: {exc.reason}", 0, exc.start)
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise ValidationError("document must be a JSON object", "$")
    _check_keys(doc, _TOP_KEYS, "")

    name = _require(doc, "name", "")
    if not isinstance(name, str) or not name:
        raise ValidationError("must be a non-empty string", "name")
    cruise = _number(_require(doc, "cruise_speed", ""), "cruise_speed",
                     minimum=0, strict_min=True)
    horizon = _integer(doc.get("horizon", DEFAULT_HORIZON), "horizon", minimum=1)
    seed = _integer(doc.get("seed", 0), "seed", minimum=0)
    if seed >= 2**64:
        raise ValidationError("must fit in 64 unsigned bits", "seed")
    dt = _number(doc.get("dt", DEFAULT_DT), "dt", minimum=0, strict_min=True)

    segs_doc = _require(doc, "segments", "")
    if not isinstance(segs_doc, list) or not segs_doc:
        raise ValidationError("expected a non-empty array", "segments")
    segments = []
    for i, seg in enumerate(segs_doc):
        path = f"segments[{i}]"
        if not isinstance(seg, dict):
            raise ValidationError("expected an object", path)
        _check_keys(seg, _SEGMENT_KEYS, path)
        length = _number(_require(seg, "length", path), f"{path}.length",
                         minimum=0, strict_min=True)
        lanes = _integer(_require(seg, "lanes", path), f"{path}.lanes", minimum=1)
        limit = _number(_require(seg, "speed_limit", path), f"{path}.speed_limit",
                        minimum=0, strict_min=True)
        tags = set()
        for t in seg.get("tags", []):
            try:
                tags.add(SegmentTag(t))
            except ValueError:
                raise ValidationError(f"unknown tag {t!r}", f"{path}.tags")
        obstacles = []
        for j, ob in enumerate(seg.get("obstacles", [])):
            opath = f"{path}.obstacles[{j}]"
            if not isinstance(ob, dict):
                raise ValidationError("expected an object", opath)
            _check_keys(ob, _OBSTACLE_KEYS, opath)
            olane = _integer(_require(ob, "lane", opath), f"{opath}.lane", minimum=0)
            oat = _number(_require(ob, "at", opath), f"{opath}.at", minimum=0)
            if olane >= lanes:
                raise ValidationError(f"lane {olane} outside {lanes}-lane segment",
                                      f"{opath}.lane")
            if oat >= length:
                raise ValidationError(f"offset {oat} outside segment of length {length}",
                                      f"{opath}.at")
            obstacles.append(Obstacle(lane=olane, at=oat))
        segments.append(Segment(length=length, lanes=lanes, speed_limit=limit,
                                tags=frozenset(tags), obstacles=tuple(obstacles)))
    road = Road(tuple(segments))

    init_doc = _require(doc, "initial", "")
    if not isinstance(init_doc, dict):
        raise ValidationError("expected an object", "initial")
    _check_keys(init_doc, _INITIAL_KEYS, "initial")
    position = _number(_require(init_doc, "position", "initial"),
                       "initial.position", minimum=0)
    lane = _integer(_require(init_doc, "lane", "initial"), "initial.lane", minimum=0)
    speed = _number(_require(init_doc, "speed", "initial"), "initial.speed", minimum=0)
    sensor_health = _number(init_doc.get("sensor_health", 1.0),
                            "initial.sensor_health", minimum=0)
    if sensor_health > 1.0:
        raise ValidationError("must be within [0, 1]", "initial.sensor_health")
    if position >= road.total_length:
        raise ValidationError("initial position beyond route end", "initial.position")
    if lane >= road.lanes_at(position):
        raise ValidationError(
            f"lane {lane} does not exist at position {position}", "initial.lane")
    initial = WorldState(position=position, lane=lane, speed=speed, tick=0,
                         mode=Mode.AUTO, sensor_health=sensor_health)

    driver_doc = doc.get("driver", {})
    if not isinstance(driver_doc, dict):
        raise ValidationError("expected an object", "driver")
    _check_keys(driver_doc, _DRIVER_KEYS, "driver")
    vigilance = _number(driver_doc.get("vigilance", 1.0), "driver.vigilance", minimum=0)
    if vigilance > 1.0:
        raise ValidationError("must be within [0, 1]", "driver.vigilance")
    load = _integer(driver_doc.get("load", 2), "driver.load")
    if load not in (1, 2, 3):
        raise ValidationError("load level must be 1, 2 or 3", "driver.load")
    secondary = driver_doc.get("secondary_task", False)
    if not isinstance(secondary, bool):
        raise ValidationError("expected a boolean", "driver.secondary_task")
    cond_name = driver_doc.get("condition", "HARD")
    try:
        condition = Condition(cond_name)
    except ValueError:
        raise ValidationError(f"unknown condition {cond_name!r}", "driver.condition")
    driver = DriverProfile(vigilance=vigilance, load=load,
                           secondary_task=secondary, condition=condition)

    return Scenario(name=name, cruise_speed=cruise, initial=initial, road=road,
                    driver=driver, seed=seed, horizon=horizon, dt=dt)


def load_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        return parse_scenario(fh.read())


# --- Canonical serialization -------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        return format(value, ".6g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if isinstance(value, list):
        return "[" + ",".join(_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        items = (f"{json.dumps(k)}:{_fmt(v)}" for k, v in sorted(value.items()))
        return "{" + ",".join(items) + "}"
    raise TypeError(f"cannot serialize {value!r}")


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "cruise_speed": s.cruise_speed,
        "horizon": s.horizon,
        "seed": s.seed,
        "dt": s.dt,
        "initial": {
            "position": s.initial.position,
            "lane": s.initial.lane,
            "speed": s.initial.speed,
            "sensor_health": s.initial.sensor_health,
        },
        "driver": {
            "vigilance": s.driver.vigilance,
            "load": s.driver.load,
            "secondary_task": s.driver.secondary_task,
            "condition": s.driver.condition.value,
        },
        "segments": [
            {
                "length": seg.length,
                "lanes": seg.lanes,
                "speed_limit": seg.speed_limit,
                "tags": sorted(t.value for t in seg.tags),
                "obstacles": [
                    {"lane": ob.lane, "at": ob.at}
                    for ob in sorted(seg.obstacles, key=lambda o: (o.at, o.lane))
                ],
            }
            for seg in s.road.segments
        ],
    }


def serialize_scenario(s: Scenario) -> bytes:
    """Canonical bytes: sorted keys, fixed float formatting, trailing newline.

    serialize(parse(serialize(s))) == serialize(s) for every valid scenario.
    """
    return (_fmt(scenario_to_dict(s)) + "\n").encode("utf-8")
