"""Monitoring and replanning.

Monitoring rolls the default policy forward and scores the predicted trace
against the query catalog. When the default future is not LOW, a best-first
search looks for an alternative action sequence whose own trace stays LOW
while still making progress (within a slack of the default rollout's final
position). No such plan means the handover machinery takes over.

Search notes:
  * Per-step branching is the fixed six-action set in `expand_kernel`.
  * g-cost per step: dt + 0.5 per lane change + 0.2 * braking fraction.
  * h is the max of two admissible lower bounds: remaining required
    progress / v_max, and dt * steps still needed before the trace can
    terminate. h is consistent, so the first goal popped is least-cost.
  * When every catalog entry has the shape F[<=k] core with k >= horizon
    and a propositional core, match state is a small bitmask; nodes whose
    accumulated match score already breaks LOW are pruned and duplicate
    world states (same depth/lane/speed/position/match-mask) are merged.
    Otherwise the search falls back to whole-trace scoring at goal nodes
    with no duplicate merging.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, replace

import numpy as np

from ._kernel import ATOM_BIT, impl
from .road import Road
from .tql import (
    And,
    Atom,
    Const,
    CriticalityReport,
    Finally,
    Formula,
    Level,
    Not,
    Or,
    QueryCatalog,
    DEFAULT_THRESHOLDS,
    bits_to_atoms,
    compile_formula,
    score_trace,
)
from .world import Action, ActionKind, SimParams, WorldState

DEFAULT_NODE_BUDGET = 200_000
DEFAULT_PROGRESS_SLACK = 100.0

LANE_CHANGE_COST = 0.5
BRAKE_COST = 0.2


@dataclass(frozen=True)
class Trace:
    states: tuple[WorldState, ...]
    propositions: tuple[frozenset[str], ...]
    actions: tuple[Action, ...]

    @property
    def final_position(self) -> float:
        return self.states[-1].position


@dataclass(frozen=True)
class Plan:
    actions: tuple[Action, ...]
    cost: float


@dataclass(frozen=True)
class NoPlan:
    budget_exhausted: bool = False


class VerdictKind(enum.Enum):
    SAFE = "SAFE"
    AVOIDABLE = "AVOIDABLE"
    UNAVOIDABLE = "UNAVOIDABLE"


@dataclass(frozen=True)
class PlannerVerdict:
    kind: VerdictKind
    report: CriticalityReport   # criticality of the default rollout
    plan: Plan | None = None
    budget_exhausted: bool = False


def rollout(state: WorldState, road: Road, params: SimParams,
            horizon: int) -> Trace:
    """Simulate the default policy for `horizon` ticks.

    The trace always has horizon+1 states; once the route end is reached the
    terminal state is repeated verbatim and no further actions are recorded.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    positions, lanes, speeds, bits, kinds, mags = impl.rollout_kernel(
        road.pack, state.position, state.lane, state.speed, state.sensor_health,
        horizon, params.dt, params.a_max, params.v_max, params.cruise_speed,
        params.high_speed_threshold, params.obstacle_horizon)
    states = [state]
    for k in range(1, len(positions)):
        if k > len(kinds):
            states.append(states[-1])   # padded terminal state
        else:
            states.append(replace(state, position=positions[k], lane=lanes[k],
                                  speed=speeds[k], tick=state.tick + k))
    actions = tuple(Action(ActionKind(k), m) for k, m in zip(kinds, mags))
    props = tuple(bits_to_atoms(b) for b in bits)
    return Trace(tuple(states), props, actions)


def _propositional(f: Formula) -> bool:
    if isinstance(f, (Atom, Const)):
        return True
    if isinstance(f, Not):
        return _propositional(f.child)
    if isinstance(f, (And, Or)):
        return _propositional(f.left) and _propositional(f.right)
    return False


def _memoryless_cores(catalog: QueryCatalog, horizon: int):
    """Per-entry propositional cores when every query is F[<=k>=horizon] core."""
    cores = []
    for entry in catalog.entries:
        f = entry.formula
        if isinstance(f, Finally) and f.bound >= horizon and _propositional(f.child):
            cores.append(f.child)
        else:
            return None
    return cores


def _core_tables(cores) -> list[np.ndarray]:
    """Truth table of each propositional core over all 2^10 proposition masks."""
    tables = []
    single = np.zeros(1, dtype=np.int64)
    for core in cores:
        prog = compile_formula(core, ATOM_BIT)
        table = np.zeros(1 << len(ATOM_BIT), dtype=bool)
        for mask in range(1 << len(ATOM_BIT)):
            single[0] = mask
            table[mask] = impl.eval_kernel(prog.op, prog.arg, prog.left,
                                           prog.right, prog.root, single, 0)
        tables.append(table)
    return tables


def find_safe_plan(state: WorldState, road: Road, params: SimParams,
                   horizon: int, catalog: QueryCatalog,
                   thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
                   slack: float = DEFAULT_PROGRESS_SLACK,
                   node_budget: int = DEFAULT_NODE_BUDGET) -> Plan | NoPlan:
    """Least-cost action sequence whose trace scores LOW, or NoPlan."""
    default = rollout(state, road, params, horizon)
    required_final = default.final_position - slack
    theta1 = thresholds[0]
    pack = road.pack
    dt, a_max, v_max = params.dt, params.a_max, params.v_max
    total = pack.total_length

    cores = _memoryless_cores(catalog, horizon)
    weights = [e.severity * e.weight for e in catalog.entries]
    if cores is not None:
        tables = _core_tables(cores)
    else:
        programs = [compile_formula(e.formula, ATOM_BIT) for e in catalog.entries]

    def mask_score(bits: int, prev_mask: int) -> tuple[int, float]:
        mask = prev_mask
        for idx, table in enumerate(tables):
            if table[bits]:
                mask |= 1 << idx
        return mask, sum(w for idx, w in enumerate(weights) if mask >> idx & 1)

    def trace_is_low(bits_path: list[int]) -> bool:
        padded = bits_path + [bits_path[-1]] * (horizon + 1 - len(bits_path))
        arr = np.asarray(padded, dtype=np.int64)
        score = 0.0
        for prog, w in zip(programs, weights):
            if impl.eval_kernel(prog.op, prog.arg, prog.left, prog.right,
                                prog.root, arr, 0):
                score += w
                if score >= theta1:
                    return False
        return True

    # Node arrays; nodes addressed by index.
    parent = [-1]
    act = [None]   # type: list[Action | None]
    n_pos = [state.position]
    n_lane = [state.lane]
    n_speed = [state.speed]
    n_depth = [0]
    n_g = [0.0]
    n_bits = [impl.abstract_kernel(pack, state.position, state.lane, state.speed,
                                   state.sensor_health, dt, a_max,
                                   params.high_speed_threshold,
                                   params.obstacle_horizon)]
    n_mask = [0]
    if cores is not None:
        m0, s0 = mask_score(n_bits[0], 0)
        if s0 >= theta1:
            return NoPlan(False)   # current state already breaks LOW
        n_mask[0] = m0

    def heuristic(pos: float, depth: int) -> float:
        if depth >= horizon or pos >= total:
            return 0.0
        remaining = horizon - depth
        needed = required_final - pos
        if needed > remaining * v_max * dt + 1e-9:
            return math.inf
        h_steps = min(remaining, math.ceil(max(0.0, total - pos) / (v_max * dt))) * dt
        h_prog = needed / v_max if needed > 0 else 0.0
        return max(h_steps, h_prog)

    def reconstruct(idx: int) -> tuple[tuple[Action, ...], list[int]]:
        acts: list[Action] = []
        bits_path: list[int] = []
        while idx >= 0:
            bits_path.append(n_bits[idx])
            if act[idx] is not None:
                acts.append(act[idx])
            idx = parent[idx]
        acts.reverse()
        bits_path.reverse()
        return tuple(acts), bits_path

    h0 = heuristic(state.position, 0)
    if math.isinf(h0):
        return NoPlan(False)
    frontier: list[tuple[float, int, int]] = [(h0, 0, 0)]
    seq = 1
    best_g: dict = {}
    expansions = 0

    while frontier:
        f, _, idx = heapq.heappop(frontier)
        depth, pos = n_depth[idx], n_pos[idx]
        terminal = depth >= horizon or pos >= total
        if terminal:
            if pos >= required_final:
                actions, bits_path = reconstruct(idx)
                if cores is not None or trace_is_low(bits_path):
                    return Plan(actions, n_g[idx])
            continue
        if expansions >= node_budget:
            return NoPlan(True)
        expansions += 1
        children = impl.expand_kernel(
            pack, pos, n_lane[idx], n_speed[idx], state.sensor_health, dt,
            a_max, v_max, params.cruise_speed, params.high_speed_threshold,
            params.obstacle_horizon)
        for ordinal, kind, mag, pos2, lane2, speed2, bits2 in children:
            if cores is not None:
                mask2, score2 = mask_score(bits2, n_mask[idx])
                if score2 >= theta1:
                    continue
            else:
                mask2 = 0
            g2 = n_g[idx] + dt
            if kind in (impl.LANE_LEFT, impl.LANE_RIGHT):
                g2 += LANE_CHANGE_COST
            elif kind == impl.DECEL:
                g2 += BRAKE_COST * mag / a_max
            h = heuristic(pos2, depth + 1)
            if math.isinf(h):
                continue
            if cores is not None:
                key = (depth + 1, lane2, pos2, speed2, mask2)
                known = best_g.get(key)
                if known is not None and known <= g2:
                    continue
                best_g[key] = g2
            node = len(parent)
            parent.append(idx)
            act.append(Action(ActionKind(kind), mag))
            n_pos.append(pos2)
            n_lane.append(lane2)
            n_speed.append(speed2)
            n_depth.append(depth + 1)
            n_g.append(g2)
            n_bits.append(bits2)
            n_mask.append(mask2)
            heapq.heappush(frontier, (g2 + h, seq, node))
            seq += 1
    return NoPlan(False)


def assess(state: WorldState, road: Road, params: SimParams, horizon: int,
           catalog: QueryCatalog,
           thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
           slack: float = DEFAULT_PROGRESS_SLACK,
           node_budget: int = DEFAULT_NODE_BUDGET) -> PlannerVerdict:
    """SAFE if the default future scores LOW; otherwise try to plan around it."""
    default = rollout(state, road, params, horizon)
    report = score_trace(default.propositions, catalog, thresholds, params.dt)
    if report.level is Level.LOW:
        return PlannerVerdict(VerdictKind.SAFE, report)
    outcome = find_safe_plan(state, road, params, horizon, catalog,
                             thresholds, slack, node_budget)
    if isinstance(outcome, Plan):
        return PlannerVerdict(VerdictKind.AVOIDABLE, report, plan=outcome)
    return PlannerVerdict(VerdictKind.UNAVOIDABLE, report,
                          budget_exhausted=outcome.budget_exhausted)


def time_to_critical(verdict: PlannerVerdict, dt: float) -> float | None:
    """Seconds until the earliest predicted match, for unavoidable verdicts."""
    if verdict.kind is not VerdictKind.UNAVOIDABLE:
        return None
    steps = [r.step for r in verdict.report.results if r.matched and r.step is not None]
    if not steps:
        return None
    return min(steps) * dt
