from __future__ import annotations

import math

import pytest
from hypothesis import given, settings, strategies as st

from handover.road import Obstacle, Road, Segment
from handover.world import (
    Action,
    ActionKind,
    InapplicableAction,
    SimParams,
    WorldState,
    braking_distance,
    default_policy,
    step,
)

P = SimParams()


def flat_road(lanes=2, length=1000.0, limit=33.0, obstacles=()):
    return Road((Segment(length, lanes, limit, obstacles=tuple(obstacles)),))


class TestStep:
    def test_hold_constant_velocity(self):
        s = step(WorldState(100.0, 0, 20.0), Action(ActionKind.HOLD), flat_road(), P)
        assert s.position == 120.0
        assert s.speed == 20.0
        assert s.tick == 1

    def test_decel_clamps_at_zero_with_midpoint_travel(self):
        s = step(WorldState(0.0, 0, 2.0), Action(ActionKind.DECEL, 3.0), flat_road(), P)
        assert s.speed == 0.0
        assert s.position == 1.0

    def test_lane_change_advances_at_constant_speed(self):
        s = step(WorldState(50.0, 0, 20.0), Action(ActionKind.LANE_RIGHT), flat_road(2), P)
        assert s.lane == 1
        assert s.speed == 20.0
        assert s.position == 70.0

    def test_accel_clamps_at_v_max(self):
        s = step(WorldState(0.0, 0, 35.0), Action(ActionKind.ACCEL, 3.0), flat_road(), P)
        assert s.speed == P.v_max

    def test_lane_change_out_of_range_rejected(self):
        with pytest.raises(InapplicableAction):
            step(WorldState(0.0, 0, 10.0), Action(ActionKind.LANE_LEFT), flat_road(2), P)
        with pytest.raises(InapplicableAction):
            step(WorldState(0.0, 1, 10.0), Action(ActionKind.LANE_RIGHT), flat_road(2), P)

    def test_magnitude_over_a_max_rejected(self):
        with pytest.raises(InapplicableAction):
            step(WorldState(0.0, 0, 10.0), Action(ActionKind.ACCEL, 3.5), flat_road(), P)

    def test_lane_change_into_blocked_cell_rejected(self):
        road = flat_road(2, obstacles=[Obstacle(1, 110.0)])
        with pytest.raises(InapplicableAction):
            step(WorldState(100.0, 0, 20.0), Action(ActionKind.LANE_RIGHT), road, P)

    def test_safe_stop_brakes_and_switches_mode(self):
        s = step(WorldState(0.0, 0, 30.0), Action(ActionKind.SAFE_STOP), flat_road(), P)
        assert s.speed == 27.0
        assert s.mode.value == "SAFE_STOP"

    def test_position_clamped_at_route_end(self):
        road = flat_road(length=100.0)
        s = step(WorldState(95.0, 0, 30.0), Action(ActionKind.HOLD), road, P)
        assert s.position == 100.0


class TestBrakingDistance:
    def test_textbook_value(self):
        assert braking_distance(20.0, 4.0) == 50.0

    def test_zero_speed(self):
        assert braking_distance(0.0, 4.0) == 0.0

    def test_another_value(self):
        assert braking_distance(30.0, 5.0) == 90.0

    def test_rejects_nonpositive_decel(self):
        with pytest.raises(ValueError):
            braking_distance(10.0, 0.0)


class TestDefaultPolicy:
    def test_accelerates_below_cruise_on_empty_road(self):
        a = default_policy(WorldState(0.0, 0, 10.0), flat_road(), P)
        assert a.kind is ActionKind.ACCEL

    def test_brakes_above_target(self):
        a = default_policy(WorldState(0.0, 0, 33.0), flat_road(limit=20.0), P)
        assert a.kind is ActionKind.DECEL
        assert a.magnitude == P.a_max

    def test_holds_at_target(self):
        a = default_policy(WorldState(0.0, 0, 30.0), flat_road(limit=33.0), P)
        assert a.kind is ActionKind.HOLD

    def test_partial_decel_closes_gap_exactly(self):
        a = default_policy(WorldState(0.0, 0, 31.0), flat_road(limit=33.0),
                           SimParams(cruise_speed=30.0))
        assert a.kind is ActionKind.DECEL
        assert a.magnitude == 1.0

    def test_lane_change_when_threatened_and_adjacent_free(self):
        # speed 20, a_max 4: braking 50 + 20 = threat 70 >= distance 40.
        params = SimParams(a_max=4.0, cruise_speed=20.0)
        road = flat_road(2, obstacles=[Obstacle(0, 140.0)])
        a = default_policy(WorldState(100.0, 0, 20.0), road, params)
        assert a.kind is ActionKind.LANE_RIGHT

    def test_brakes_hard_when_threatened_on_single_lane(self):
        params = SimParams(a_max=4.0, cruise_speed=20.0)
        road = flat_road(1, obstacles=[Obstacle(0, 140.0)])
        a = default_policy(WorldState(100.0, 0, 20.0), road, params)
        assert a.kind is ActionKind.DECEL
        assert a.magnitude == 4.0

    def test_left_preferred_when_both_adjacent_free(self):
        params = SimParams(a_max=4.0, cruise_speed=20.0)
        road = flat_road(3, obstacles=[Obstacle(1, 140.0)])
        a = default_policy(WorldState(100.0, 1, 20.0), road, params)
        assert a.kind is ActionKind.LANE_LEFT

    def test_obstacle_beyond_threat_ignored(self):
        params = SimParams(a_max=4.0, cruise_speed=20.0)
        road = flat_road(2, obstacles=[Obstacle(0, 200.0)])
        a = default_policy(WorldState(100.0, 0, 20.0), road, params)
        assert a.kind is ActionKind.HOLD


# --- property tests ------------------------------------------------------

road_strategy = st.builds(
    lambda lanes, length, obstacles: flat_road(
        lanes, length,
        obstacles=[Obstacle(lane % lanes, min(at, length - 1.0))
                   for lane, at in obstacles]),
    lanes=st.integers(1, 3),
    length=st.floats(200.0, 2000.0),
    obstacles=st.lists(st.tuples(st.integers(0, 2), st.floats(0.0, 1500.0)),
                       max_size=4),
)

state_strategy = st.builds(
    lambda pos, lane, speed: (pos, lane, speed),
    pos=st.floats(0.0, 190.0),
    lane=st.integers(0, 2),
    speed=st.floats(0.0, 36.0),
)


@given(road=road_strategy, raw=state_strategy)
@settings(max_examples=300, deadline=None)
def test_policy_total_and_step_invariants(road, raw):
    pos, lane, speed = raw
    state = WorldState(pos, min(lane, road.lanes_at(pos) - 1), speed)
    action = default_policy(state, road, P)
    nxt = step(state, action, road, P)   # policy output must be applicable
    assert nxt.position >= state.position
    assert 0.0 <= nxt.speed <= P.v_max
    assert nxt.tick == state.tick + 1
    again = step(state, action, road, P)
    assert again == nxt


@given(speed=st.integers(0, 12))
@settings(max_examples=40, deadline=None)
def test_stopping_bound_exact(speed):
    """Full braking from v (a multiple of a_max*dt) stops in ceil(v/a) ticks
    covering exactly v^2/(2a) meters."""
    v = float(speed * P.a_max)
    road = flat_road(length=10000.0)
    state = WorldState(0.0, 0, v)
    ticks = 0
    while state.speed > 0:
        state = step(state, Action(ActionKind.DECEL, P.a_max), road, P)
        ticks += 1
    assert ticks == math.ceil(v / (P.a_max * P.dt))
    assert state.position == braking_distance(v, P.a_max)
