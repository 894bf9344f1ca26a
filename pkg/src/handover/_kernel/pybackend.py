"""Pure-Python kernel backend.

Reference semantics for the hot inner loops: world stepping, the default
driving policy, state abstraction to proposition bitmasks, policy rollout,
planner node expansion, and bounded temporal formula evaluation over
bitmask traces. The compiled backend (`_native.pyx`) mirrors every
function here one-to-one; parity is enforced by tests.

Proposition bit layout (shared across backends, see ATOM_ORDER in
`handover._kernel`):

    0 InTunnel        1 InFog           2 InConstruction  3 OnIce
    4 SensorDegraded  5 HighSpeed       6 ObstacleAhead   7 LaneBlocked
    8 AdjacentLaneFree                  9 NearRouteEnd

Formula program opcodes:

    0 FALSE  1 TRUE  2 ATOM  3 NOT  4 AND  5 OR
    6 NEXT   7 FINALLY  8 GLOBALLY  9 UNTIL
"""

from __future__ import annotations

BACKEND = "python"

# Action kind codes, aligned with handover.world.ActionKind.
HOLD = 0
ACCEL = 1
DECEL = 2
LANE_LEFT = 3
LANE_RIGHT = 4
INITIATE_HANDOVER = 5
SAFE_STOP = 6


def _segment_index(seg_end, position):
    n = len(seg_end)
    for i in range(n):
        if position < seg_end[i]:
            return i
    return n - 1


def _obstacle_distance(obs_pos, obs_lane, position, lane):
    """Distance to the nearest obstacle at or ahead of position; -1 if none."""
    best = -1.0
    for i in range(len(obs_pos)):
        if obs_lane[i] == lane and obs_pos[i] >= position:
            d = obs_pos[i] - position
            if best < 0 or d < best:
                best = d
    return best


def span_blocked_kernel(pack, lane, lo, hi):
    obs_pos, obs_lane = pack.obs_pos, pack.obs_lane
    for i in range(len(obs_pos)):
        if obs_lane[i] == lane and lo <= obs_pos[i] <= hi:
            return True
    return False


def _lane_free(obs_pos, obs_lane, position, lane, horizon):
    d = _obstacle_distance(obs_pos, obs_lane, position, lane)
    return d < 0 or d > horizon


def step_kernel(pos, lane, speed, kind, magnitude, dt, a_max, v_max, total_length):
    accel = 0.0
    if kind == ACCEL:
        accel = magnitude
    elif kind == DECEL:
        accel = -magnitude
    elif kind == SAFE_STOP:
        accel = -a_max
    if kind == LANE_LEFT:
        lane -= 1
    elif kind == LANE_RIGHT:
        lane += 1
    new_speed = speed + accel * dt
    if new_speed < 0.0:
        new_speed = 0.0
    elif new_speed > v_max:
        new_speed = v_max
    # Midpoint rule: exact displacement under constant acceleration.
    new_pos = pos + 0.5 * (speed + new_speed) * dt
    if new_pos > total_length:
        new_pos = total_length
    return new_pos, lane, new_speed


def policy_kernel(pack, pos, lane, speed, dt, a_max, cruise, obstacle_horizon):
    """Default driving policy; first matching rule wins.

    1. threat in lane, adjacent lane free       -> lane change (left first)
    2. threat in lane, no free adjacent lane    -> full brake
    3. above target speed                       -> brake toward target
    4. below target speed                       -> accelerate toward target
    5. otherwise                                -> hold
    """
    seg = _segment_index(pack.seg_end, pos)
    target = min(float(pack.seg_limit[seg]), cruise)
    lanes = int(pack.seg_lanes[seg])
    obs_pos, obs_lane = pack.obs_pos, pack.obs_lane

    d_own = _obstacle_distance(obs_pos, obs_lane, pos, lane)
    threat = speed * speed / (2.0 * a_max) + speed * dt
    if 0 <= d_own <= threat:
        for cand, kind in ((lane - 1, LANE_LEFT), (lane + 1, LANE_RIGHT)):
            if 0 <= cand < lanes and _lane_free(obs_pos, obs_lane, pos, cand, obstacle_horizon):
                return kind, 0.0
        return DECEL, a_max
    if speed > target:
        return DECEL, min(a_max, (speed - target) / dt)
    if speed < target:
        return ACCEL, min(a_max, (target - speed) / dt)
    return HOLD, 0.0


def abstract_kernel(pack, pos, lane, speed, sensor_health, dt, a_max,
                    high_speed_threshold, obstacle_horizon):
    seg = _segment_index(pack.seg_end, pos)
    tags = int(pack.seg_tags[seg])
    lanes = int(pack.seg_lanes[seg])
    obs_pos, obs_lane = pack.obs_pos, pack.obs_lane

    bits = 0
    if tags & 1:
        bits |= 1 << 0   # InTunnel
    if tags & 2:
        bits |= 1 << 1   # InFog
    if tags & 4:
        bits |= 1 << 2   # InConstruction
    if tags & 8:
        bits |= 1 << 3   # OnIce
    if sensor_health < 0.5 or tags & 16:
        bits |= 1 << 4   # SensorDegraded
    if speed > high_speed_threshold:
        bits |= 1 << 5   # HighSpeed
    d_own = _obstacle_distance(obs_pos, obs_lane, pos, lane)
    if 0 <= d_own <= obstacle_horizon:
        bits |= 1 << 6   # ObstacleAhead
    if 0 <= d_own <= speed * speed / (2.0 * a_max) + speed * dt:
        bits |= 1 << 7   # LaneBlocked
    for cand in (lane - 1, lane + 1):
        if 0 <= cand < lanes and _lane_free(obs_pos, obs_lane, pos, cand, obstacle_horizon):
            bits |= 1 << 8   # AdjacentLaneFree
            break
    if pack.total_length - pos < obstacle_horizon:
        bits |= 1 << 9   # NearRouteEnd
    return bits


def rollout_kernel(pack, pos, lane, speed, sensor_health, steps, dt, a_max, v_max,
                   cruise, high_speed_threshold, obstacle_horizon):
    """Roll the default policy `steps` ticks; pad with the terminal state once
    the route end is reached. Returns parallel lists: states (steps+1 of
    position/lane/speed/bits) and the actions actually applied (kind, mag)."""
    total = pack.total_length
    positions = [pos]
    lanes = [lane]
    speeds = [speed]
    bits = [abstract_kernel(pack, pos, lane, speed, sensor_health, dt, a_max,
                            high_speed_threshold, obstacle_horizon)]
    kinds: list[int] = []
    mags: list[float] = []
    for _ in range(steps):
        if pos >= total:
            positions.append(pos)
            lanes.append(lane)
            speeds.append(speed)
            bits.append(bits[-1])
            continue
        kind, mag = policy_kernel(pack, pos, lane, speed, dt, a_max, cruise,
                                  obstacle_horizon)
        pos, lane, speed = step_kernel(pos, lane, speed, kind, mag, dt, a_max,
                                       v_max, total)
        positions.append(pos)
        lanes.append(lane)
        speeds.append(speed)
        bits.append(abstract_kernel(pack, pos, lane, speed, sensor_health, dt,
                                    a_max, high_speed_threshold, obstacle_horizon))
        kinds.append(kind)
        mags.append(mag)
    return positions, lanes, speeds, bits, kinds, mags


# Planner branching: ordinal -> (kind, magnitude factor of a_max).
_BRANCH = (
    (0, HOLD, 0.0),
    (1, ACCEL, 1.0),
    (2, DECEL, 1.0),
    (3, DECEL, 0.5),
    (4, LANE_LEFT, 0.0),
    (5, LANE_RIGHT, 0.0),
)


def expand_kernel(pack, pos, lane, speed, sensor_health, dt, a_max, v_max,
                  cruise, high_speed_threshold, obstacle_horizon):
    """Successors of a search node under the planner's action set.

    Returns (ordinal, kind, magnitude, pos2, lane2, speed2, bits2) tuples for
    every applicable action, in ordinal order.
    """
    seg = _segment_index(pack.seg_end, pos)
    lanes = int(pack.seg_lanes[seg])
    out = []
    for ordinal, kind, factor in _BRANCH:
        if kind == LANE_LEFT or kind == LANE_RIGHT:
            cand = lane - 1 if kind == LANE_LEFT else lane + 1
            if not 0 <= cand < lanes:
                continue
            if span_blocked_kernel(pack, cand, pos, pos + speed * dt):
                continue
        mag = a_max * factor
        pos2, lane2, speed2 = step_kernel(pos, lane, speed, kind, mag, dt,
                                          a_max, v_max, pack.total_length)
        bits2 = abstract_kernel(pack, pos2, lane2, speed2, sensor_health, dt,
                                a_max, high_speed_threshold, obstacle_horizon)
        out.append((ordinal, kind, mag, pos2, lane2, speed2, bits2))
    return out


# Formula program opcodes.
OP_FALSE = 0
OP_TRUE = 1
OP_ATOM = 2
OP_NOT = 3
OP_AND = 4
OP_OR = 5
OP_NEXT = 6
OP_FINALLY = 7
OP_GLOBALLY = 8
OP_UNTIL = 9


def eval_kernel(op, arg, left, right, node, trace_bits, i):
    """Finite-trace semantics at index i; n = len(trace)-1 truncates bounds."""
    o = op[node]
    if o == OP_FALSE:
        return False
    if o == OP_TRUE:
        return True
    if o == OP_ATOM:
        return bool(trace_bits[i] >> arg[node] & 1)
    if o == OP_NOT:
        return not eval_kernel(op, arg, left, right, left[node], trace_bits, i)
    if o == OP_AND:
        return (eval_kernel(op, arg, left, right, left[node], trace_bits, i)
                and eval_kernel(op, arg, left, right, right[node], trace_bits, i))
    if o == OP_OR:
        return (eval_kernel(op, arg, left, right, left[node], trace_bits, i)
                or eval_kernel(op, arg, left, right, right[node], trace_bits, i))
    n = len(trace_bits) - 1
    if o == OP_NEXT:
        # Strong next: false at the trace boundary.
        return i + 1 <= n and eval_kernel(op, arg, left, right, left[node],
                                          trace_bits, i + 1)
    hi = i + arg[node]
    if hi > n:
        hi = n
    if o == OP_FINALLY:
        for j in range(i, hi + 1):
            if eval_kernel(op, arg, left, right, left[node], trace_bits, j):
                return True
        return False
    if o == OP_GLOBALLY:
        for j in range(i, hi + 1):
            if not eval_kernel(op, arg, left, right, left[node], trace_bits, j):
                return False
        return True
    if o == OP_UNTIL:
        for j in range(i, hi + 1):
            if eval_kernel(op, arg, left, right, right[node], trace_bits, j):
                return True
            if not eval_kernel(op, arg, left, right, left[node], trace_bits, j):
                return False
        return False
    raise ValueError(f"bad opcode {o}")


def earliest_kernel(op, arg, left, right, root, trace_bits):
    """Earliest witness step at i=0, or -1 when the formula does not match.

    Finally/Until report their top-level witness index; every other shape
    reports 0 on a match.
    """
    o = op[root]
    n = len(trace_bits) - 1
    hi = min(arg[root], n) if o in (OP_FINALLY, OP_UNTIL) else 0
    if o == OP_FINALLY:
        for j in range(hi + 1):
            if eval_kernel(op, arg, left, right, left[root], trace_bits, j):
                return j
        return -1
    if o == OP_UNTIL:
        for j in range(hi + 1):
            if eval_kernel(op, arg, left, right, right[root], trace_bits, j):
                return j
            if not eval_kernel(op, arg, left, right, left[root], trace_bits, j):
                return -1
        return -1
    return 0 if eval_kernel(op, arg, left, right, root, trace_bits, 0) else -1
