"""Abstract vehicle world: states, actions, one-tick transition and the
default driving policy.

The model is deliberately coarse: one ego vehicle on a segmented route,
discrete ticks, atomic lane changes, no lateral dynamics. Physics clamps
speed to [0, v_max]; segment speed limits only steer the policy target.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ._kernel import impl
from .road import Road


class Mode(enum.Enum):
    AUTO = "AUTO"
    HUMAN = "HUMAN"
    SAFE_STOP = "SAFE_STOP"


class ActionKind(enum.IntEnum):
    HOLD = 0
    ACCEL = 1
    DECEL = 2
    LANE_LEFT = 3
    LANE_RIGHT = 4
    INITIATE_HANDOVER = 5
    SAFE_STOP = 6


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    magnitude: float = 0.0   # m/s^2, used by ACCEL/DECEL


@dataclass(frozen=True)
class SimParams:
    dt: float = 1.0
    a_max: float = 3.0
    v_max: float = 36.0
    high_speed_threshold: float = 25.0
    obstacle_horizon: float = 150.0
    cruise_speed: float = 30.0   # policy target cap, set from the scenario

    def __post_init__(self) -> None:
        for name in ("dt", "a_max", "v_max", "high_speed_threshold",
                     "obstacle_horizon", "cruise_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class WorldState:
    position: float
    lane: int
    speed: float
    tick: int = 0
    mode: Mode = Mode.AUTO
    sensor_health: float = 1.0


class InapplicableAction(Exception):
    """Raised when an action violates its precondition in a given state."""


def braking_distance(speed: float, a_max: float) -> float:
    """Meters needed to stop from `speed` under constant deceleration a_max."""
    if a_max <= 0:
        raise ValueError("a_max must be > 0")
    return speed * speed / (2.0 * a_max)


def check_applicable(state: WorldState, action: Action, road: Road,
                     params: SimParams) -> None:
    kind = action.kind
    if kind in (ActionKind.ACCEL, ActionKind.DECEL):
        if action.magnitude < 0:
            raise InapplicableAction(f"negative magnitude {action.magnitude}")
        if action.magnitude > params.a_max:
            raise InapplicableAction(
                f"magnitude {action.magnitude} exceeds a_max {params.a_max}")
    elif kind in (ActionKind.LANE_LEFT, ActionKind.LANE_RIGHT):
        target = state.lane - 1 if kind == ActionKind.LANE_LEFT else state.lane + 1
        if not 0 <= target < road.lanes_at(state.position):
            raise InapplicableAction(f"lane {target} does not exist here")
        # Blocked at arrival: an obstacle inside the swept interval.
        arrival = state.position + state.speed * params.dt
        if road.span_blocked(target, state.position, arrival):
            raise InapplicableAction(f"lane {target} blocked at arrival")


def step(state: WorldState, action: Action, road: Road,
         params: SimParams) -> WorldState:
    """Advance one tick. Deterministic; position never decreases."""
    check_applicable(state, action, road, params)
    pos, lane, speed = impl.step_kernel(
        state.position, state.lane, state.speed,
        int(action.kind), action.magnitude,
        params.dt, params.a_max, params.v_max, road.total_length)
    mode = Mode.SAFE_STOP if action.kind == ActionKind.SAFE_STOP else state.mode
    return replace(state, position=pos, lane=lane, speed=speed,
                   tick=state.tick + 1, mode=mode)


def default_policy(state: WorldState, road: Road, params: SimParams) -> Action:
    """Action the autonomous controller takes in `state` (always applicable)."""
    kind, mag = impl.policy_kernel(
        road.pack, state.position, state.lane, state.speed,
        params.dt, params.a_max, params.cruise_speed, params.obstacle_horizon)
    return Action(ActionKind(kind), mag)
