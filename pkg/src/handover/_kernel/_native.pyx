# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend; one-to-one mirror of pybackend.py.

Same function names, same argument conventions, same semantics. Any change
here must be made in the pure-Python backend too (and vice versa); the
parity test suite compares both on random inputs.
"""

BACKEND = "native"

HOLD = 0
ACCEL = 1
DECEL = 2
LANE_LEFT = 3
LANE_RIGHT = 4
INITIATE_HANDOVER = 5
SAFE_STOP = 6

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

cdef enum:
    K_HOLD = 0
    K_ACCEL = 1
    K_DECEL = 2
    K_LANE_LEFT = 3
    K_LANE_RIGHT = 4
    K_INITIATE_HANDOVER = 5
    K_SAFE_STOP = 6
    O_FALSE = 0
    O_TRUE = 1
    O_ATOM = 2
    O_NOT = 3
    O_AND = 4
    O_OR = 5
    O_NEXT = 6
    O_FINALLY = 7
    O_GLOBALLY = 8
    O_UNTIL = 9


cdef int _segment_index(double[:] seg_end, double position) noexcept nogil:
    cdef int n = seg_end.shape[0]
    cdef int i
    for i in range(n):
        if position < seg_end[i]:
            return i
    return n - 1


cdef double _obstacle_distance(double[:] obs_pos, long[:] obs_lane,
                               double position, long lane) noexcept nogil:
    cdef double best = -1.0
    cdef double d
    cdef int i
    for i in range(obs_pos.shape[0]):
        if obs_lane[i] == lane and obs_pos[i] >= position:
            d = obs_pos[i] - position
            if best < 0 or d < best:
                best = d
    return best


cdef bint _span_blocked(double[:] obs_pos, long[:] obs_lane, long lane,
                        double lo, double hi) noexcept nogil:
    cdef int i
    for i in range(obs_pos.shape[0]):
        if obs_lane[i] == lane and lo <= obs_pos[i] <= hi:
            return True
    return False


def span_blocked_kernel(pack, long lane, double lo, double hi):
    cdef double[:] obs_pos = pack.obs_pos
    cdef long[:] obs_lane = pack.obs_lane
    return bool(_span_blocked(obs_pos, obs_lane, lane, lo, hi))


cdef bint _lane_free(double[:] obs_pos, long[:] obs_lane, double position,
                     long lane, double horizon) noexcept nogil:
    cdef double d = _obstacle_distance(obs_pos, obs_lane, position, lane)
    return d < 0 or d > horizon


cdef inline void _step(double pos, long lane, double speed, int kind,
                       double magnitude, double dt, double a_max, double v_max,
                       double total_length, double *out_pos, long *out_lane,
                       double *out_speed) noexcept nogil:
    cdef double accel = 0.0
    cdef double new_speed, new_pos
    if kind == K_ACCEL:
        accel = magnitude
    elif kind == K_DECEL:
        accel = -magnitude
    elif kind == K_SAFE_STOP:
        accel = -a_max
    if kind == K_LANE_LEFT:
        lane -= 1
    elif kind == K_LANE_RIGHT:
        lane += 1
    new_speed = speed + accel * dt
    if new_speed < 0.0:
        new_speed = 0.0
    elif new_speed > v_max:
        new_speed = v_max
    new_pos = pos + 0.5 * (speed + new_speed) * dt
    if new_pos > total_length:
        new_pos = total_length
    out_pos[0] = new_pos
    out_lane[0] = lane
    out_speed[0] = new_speed


def step_kernel(double pos, long lane, double speed, int kind, double magnitude,
                double dt, double a_max, double v_max, double total_length):
    cdef double np_, ns
    cdef long nl
    _step(pos, lane, speed, kind, magnitude, dt, a_max, v_max, total_length,
          &np_, &nl, &ns)
    return np_, nl, ns


cdef void _policy(double[:] seg_end, long[:] seg_lanes, double[:] seg_limit,
                  double[:] obs_pos, long[:] obs_lane,
                  double pos, long lane, double speed, double dt, double a_max,
                  double cruise, double obstacle_horizon,
                  int *out_kind, double *out_mag) noexcept nogil:
    cdef int seg = _segment_index(seg_end, pos)
    cdef double target = seg_limit[seg]
    cdef long lanes = seg_lanes[seg]
    cdef double d_own, threat
    cdef long cand
    if cruise < target:
        target = cruise
    d_own = _obstacle_distance(obs_pos, obs_lane, pos, lane)
    threat = speed * speed / (2.0 * a_max) + speed * dt
    if 0 <= d_own <= threat:
        cand = lane - 1
        if 0 <= cand < lanes and _lane_free(obs_pos, obs_lane, pos, cand, obstacle_horizon):
            out_kind[0] = K_LANE_LEFT
            out_mag[0] = 0.0
            return
        cand = lane + 1
        if 0 <= cand < lanes and _lane_free(obs_pos, obs_lane, pos, cand, obstacle_horizon):
            out_kind[0] = K_LANE_RIGHT
            out_mag[0] = 0.0
            return
        out_kind[0] = K_DECEL
        out_mag[0] = a_max
        return
    if speed > target:
        out_kind[0] = K_DECEL
        out_mag[0] = min(a_max, (speed - target) / dt)
        return
    if speed < target:
        out_kind[0] = K_ACCEL
        out_mag[0] = min(a_max, (target - speed) / dt)
        return
    out_kind[0] = K_HOLD
    out_mag[0] = 0.0


def policy_kernel(pack, double pos, long lane, double speed, double dt,
                  double a_max, double cruise, double obstacle_horizon):
    cdef double[:] seg_end = pack.seg_end
    cdef long[:] seg_lanes = pack.seg_lanes
    cdef double[:] seg_limit = pack.seg_limit
    cdef double[:] obs_pos = pack.obs_pos
    cdef long[:] obs_lane = pack.obs_lane
    cdef int kind
    cdef double mag
    _policy(seg_end, seg_lanes, seg_limit, obs_pos, obs_lane, pos, lane, speed,
            dt, a_max, cruise, obstacle_horizon, &kind, &mag)
    return kind, mag


cdef long _abstract(double[:] seg_end, long[:] seg_lanes, long[:] seg_tags,
                    double[:] obs_pos, long[:] obs_lane, double total_length,
                    double pos, long lane, double speed, double sensor_health,
                    double dt, double a_max, double high_speed_threshold,
                    double obstacle_horizon) noexcept nogil:
    cdef int seg = _segment_index(seg_end, pos)
    cdef long tags = seg_tags[seg]
    cdef long lanes = seg_lanes[seg]
    cdef long bits = 0
    cdef double d_own
    cdef long cand
    if tags & 1:
        bits |= 1 << 0
    if tags & 2:
        bits |= 1 << 1
    if tags & 4:
        bits |= 1 << 2
    if tags & 8:
        bits |= 1 << 3
    if sensor_health < 0.5 or tags & 16:
        bits |= 1 << 4
    if speed > high_speed_threshold:
        bits |= 1 << 5
    d_own = _obstacle_distance(obs_pos, obs_lane, pos, lane)
    if 0 <= d_own <= obstacle_horizon:
        bits |= 1 << 6
    if 0 <= d_own <= speed * speed / (2.0 * a_max) + speed * dt:
        bits |= 1 << 7
    cand = lane - 1
    if 0 <= cand < lanes and _lane_free(obs_pos, obs_lane, pos, cand, obstacle_horizon):
        bits |= 1 << 8
    else:
        cand = lane + 1
        if 0 <= cand < lanes and _lane_free(obs_pos, obs_lane, pos, cand, obstacle_horizon):
            bits |= 1 << 8
    if total_length - pos < obstacle_horizon:
        bits |= 1 << 9
    return bits


def abstract_kernel(pack, double pos, long lane, double speed,
                    double sensor_health, double dt, double a_max,
                    double high_speed_threshold, double obstacle_horizon):
    cdef double[:] seg_end = pack.seg_end
    cdef long[:] seg_lanes = pack.seg_lanes
    cdef long[:] seg_tags = pack.seg_tags
    cdef double[:] obs_pos = pack.obs_pos
    cdef long[:] obs_lane = pack.obs_lane
    return int(_abstract(seg_end, seg_lanes, seg_tags, obs_pos, obs_lane,
                         pack.total_length, pos, lane, speed, sensor_health,
                         dt, a_max, high_speed_threshold, obstacle_horizon))


def rollout_kernel(pack, double pos, long lane, double speed,
                   double sensor_health, int steps, double dt, double a_max,
                   double v_max, double cruise, double high_speed_threshold,
                   double obstacle_horizon):
    cdef double[:] seg_end = pack.seg_end
    cdef long[:] seg_lanes = pack.seg_lanes
    cdef double[:] seg_limit = pack.seg_limit
    cdef long[:] seg_tags = pack.seg_tags
    cdef double[:] obs_pos = pack.obs_pos
    cdef long[:] obs_lane = pack.obs_lane
    cdef double total = pack.total_length
    cdef int k, kind
    cdef double mag

    positions = [pos]
    lanes = [lane]
    speeds = [speed]
    bits = [int(_abstract(seg_end, seg_lanes, seg_tags, obs_pos, obs_lane, total,
                          pos, lane, speed, sensor_health, dt, a_max,
                          high_speed_threshold, obstacle_horizon))]
    kinds = []
    mags = []
    for k in range(steps):
        if pos >= total:
            positions.append(pos)
            lanes.append(lane)
            speeds.append(speed)
            bits.append(bits[len(bits) - 1])
            continue
        _policy(seg_end, seg_lanes, seg_limit, obs_pos, obs_lane, pos, lane,
                speed, dt, a_max, cruise, obstacle_horizon, &kind, &mag)
        _step(pos, lane, speed, kind, mag, dt, a_max, v_max, total,
              &pos, &lane, &speed)
        positions.append(pos)
        lanes.append(lane)
        speeds.append(speed)
        bits.append(int(_abstract(seg_end, seg_lanes, seg_tags, obs_pos, obs_lane,
                                  total, pos, lane, speed, sensor_health, dt,
                                  a_max, high_speed_threshold, obstacle_horizon)))
        kinds.append(kind)
        mags.append(mag)
    return positions, lanes, speeds, bits, kinds, mags


def expand_kernel(pack, double pos, long lane, double speed,
                  double sensor_health, double dt, double a_max, double v_max,
                  double cruise, double high_speed_threshold,
                  double obstacle_horizon):
    cdef double[:] seg_end = pack.seg_end
    cdef long[:] seg_lanes = pack.seg_lanes
    cdef long[:] seg_tags = pack.seg_tags
    cdef double[:] obs_pos = pack.obs_pos
    cdef long[:] obs_lane = pack.obs_lane
    cdef double total = pack.total_length
    cdef long lanes = seg_lanes[_segment_index(seg_end, pos)]
    cdef int ordinal, kind
    cdef double mag, factor
    cdef double pos2, speed2
    cdef long lane2, cand, bits2

    out = []
    for ordinal in range(6):
        if ordinal == 0:
            kind = K_HOLD; factor = 0.0
        elif ordinal == 1:
            kind = K_ACCEL; factor = 1.0
        elif ordinal == 2:
            kind = K_DECEL; factor = 1.0
        elif ordinal == 3:
            kind = K_DECEL; factor = 0.5
        elif ordinal == 4:
            kind = K_LANE_LEFT; factor = 0.0
        else:
            kind = K_LANE_RIGHT; factor = 0.0
        if kind == K_LANE_LEFT or kind == K_LANE_RIGHT:
            cand = lane - 1 if kind == K_LANE_LEFT else lane + 1
            if not 0 <= cand < lanes:
                continue
            if _span_blocked(obs_pos, obs_lane, cand, pos, pos + speed * dt):
                continue
        mag = a_max * factor
        _step(pos, lane, speed, kind, mag, dt, a_max, v_max, total,
              &pos2, &lane2, &speed2)
        bits2 = _abstract(seg_end, seg_lanes, seg_tags, obs_pos, obs_lane, total,
                          pos2, lane2, speed2, sensor_health, dt, a_max,
                          high_speed_threshold, obstacle_horizon)
        out.append((ordinal, kind, mag, pos2, lane2, speed2, int(bits2)))
    return out


cdef bint _eval(long[:] op, long[:] arg, long[:] left, long[:] right,
                long node, long[:] trace, long i):
    cdef long o = op[node]
    cdef long n, hi, j
    if o == O_FALSE:
        return False
    if o == O_TRUE:
        return True
    if o == O_ATOM:
        return (trace[i] >> arg[node]) & 1
    if o == O_NOT:
        return not _eval(op, arg, left, right, left[node], trace, i)
    if o == O_AND:
        return (_eval(op, arg, left, right, left[node], trace, i)
                and _eval(op, arg, left, right, right[node], trace, i))
    if o == O_OR:
        return (_eval(op, arg, left, right, left[node], trace, i)
                or _eval(op, arg, left, right, right[node], trace, i))
    n = trace.shape[0] - 1
    if o == O_NEXT:
        return i + 1 <= n and _eval(op, arg, left, right, left[node], trace, i + 1)
    hi = i + arg[node]
    if hi > n:
        hi = n
    if o == O_FINALLY:
        for j in range(i, hi + 1):
            if _eval(op, arg, left, right, left[node], trace, j):
                return True
        return False
    if o == O_GLOBALLY:
        for j in range(i, hi + 1):
            if not _eval(op, arg, left, right, left[node], trace, j):
                return False
        return True
    if o == O_UNTIL:
        for j in range(i, hi + 1):
            if _eval(op, arg, left, right, right[node], trace, j):
                return True
            if not _eval(op, arg, left, right, left[node], trace, j):
                return False
        return False
    raise ValueError(f"bad opcode {o}")


def eval_kernel(long[:] op, long[:] arg, long[:] left, long[:] right,
                long node, long[:] trace_bits, long i):
    return bool(_eval(op, arg, left, right, node, trace_bits, i))


def earliest_kernel(long[:] op, long[:] arg, long[:] left, long[:] right,
                    long root, long[:] trace_bits):
    cdef long o = op[root]
    cdef long n = trace_bits.shape[0] - 1
    cdef long hi, j
    if o == O_FINALLY or o == O_UNTIL:
        hi = arg[root]
        if hi > n:
            hi = n
        if o == O_FINALLY:
            for j in range(hi + 1):
                if _eval(op, arg, left, right, left[root], trace_bits, j):
                    return j
            return -1
        for j in range(hi + 1):
            if _eval(op, arg, left, right, right[root], trace_bits, j):
                return j
            if not _eval(op, arg, left, right, left[root], trace_bits, j):
                return -1
        return -1
    return 0 if _eval(op, arg, left, right, root, trace_bits, 0) else -1
