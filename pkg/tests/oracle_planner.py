"""Exhaustive plan-existence oracle.

Enumerates every applicable action sequence up to the horizon through the
public step/abstract API and checks the same goal the planner uses: the
padded trace scores LOW and the final position stays within the progress
slack of the default rollout. Breadth is naturally bounded at 6^horizon,
so callers keep the horizon small.
"""

from __future__ import annotations

from handover.planner import DEFAULT_PROGRESS_SLACK, rollout
from handover.tql import Level, score_trace
from handover.world import (
    Action,
    ActionKind,
    InapplicableAction,
    SimParams,
    WorldState,
    step,
)
from handover import tql

BRANCH = (
    lambda p: Action(ActionKind.HOLD),
    lambda p: Action(ActionKind.ACCEL, p.a_max),
    lambda p: Action(ActionKind.DECEL, p.a_max),
    lambda p: Action(ActionKind.DECEL, p.a_max / 2.0),
    lambda p: Action(ActionKind.LANE_LEFT),
    lambda p: Action(ActionKind.LANE_RIGHT),
)


def goal_reached(states, road, params, horizon, catalog, thresholds,
                 required_final) -> bool:
    props = [tql.abstract(s, road, params) for s in states]
    while len(props) < horizon + 1:
        props.append(props[-1])
    report = score_trace(props, catalog, thresholds, params.dt)
    return report.level is Level.LOW and states[-1].position >= required_final


def exhaustive_plan_exists(state: WorldState, road, params: SimParams,
                           horizon: int, catalog,
                           thresholds=(2.0, 5.0),
                           slack: float = DEFAULT_PROGRESS_SLACK) -> bool:
    default = rollout(state, road, params, horizon)
    required_final = default.final_position - slack

    def recurse(current: WorldState, depth: int, states) -> bool:
        if depth == horizon or current.position >= road.total_length:
            return goal_reached(states, road, params, horizon, catalog,
                                thresholds, required_final)
        for make in BRANCH:
            action = make(params)
            try:
                nxt = step(current, action, road, params)
            except InapplicableAction:
                continue
            if recurse(nxt, depth + 1, states + [nxt]):
                return True
        return False

    return recurse(state, 0, [state])
