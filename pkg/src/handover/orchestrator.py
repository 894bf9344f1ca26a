"""Mixed-initiative handover control loop.

Per tick: apply the current controller, re-assess the predicted future,
and dispatch on the transition table below. Alerts escalate across
modalities; non-response ends in a minimal-risk stop; a cooperative driver
gets control after acknowledging and may hand back once the situation is
safe again.

Transition table (single source of truth):

    AUTONOMOUS   x AVOIDABLE                      -> PLAN_ADAPTED (REPLAN_ADOPTED)
    PLAN_ADAPTED x SAFE                           -> AUTONOMOUS
    AUTONOMOUS | PLAN_ADAPTED x UNAVOIDABLE
                 (notice <= announce_lead)        -> AWAITING_ACK (ALERT_ISSUED)
    AWAITING_ACK x ack_deadline                   -> ESCALATED (ESCALATION)
    ESCALATED    x ack_deadline, level 2 spent    -> MINIMAL_RISK (SAFE_STOP_STARTED)
    AWAITING_ACK | ESCALATED x ACK                -> HUMAN_CONTROL (ACK, TAKEOVER)
    any pre-critical state x TAKEOVER             -> HUMAN_CONTROL (TAKEOVER)
    any non-human state x time_to_critical <= T_safe -> MINIMAL_RISK (SAFE_STOP_STARTED)
    HUMAN_CONTROL x HANDBACK, assess() SAFE       -> AUTONOMOUS (HANDBACK)
    MINIMAL_RISK x speed == 0                     -> DONE (STOPPED)
    route end                                     -> DONE (COMPLETED)

ANNOUNCED is part of the state vocabulary for compatibility with response
handling but is never produced: issuing an alert moves straight to
AWAITING_ACK per the table.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

from ._kernel import impl
from .driver import (
    DriverProfile,
    Modality,
    MODALITY_ORDER,
    ReactionTable,
    ResponseKind,
    VigilanceEvent,
    default_reaction_table,
    respond,
    update_vigilance,
)
from .nlg import Fact, Predicate, TemplateTable, compose, default_templates, hazard_fact
from .planner import (
    DEFAULT_NODE_BUDGET,
    DEFAULT_PROGRESS_SLACK,
    PlannerVerdict,
    VerdictKind,
    assess,
    rollout,
    time_to_critical,
)
from .scenario import Scenario
from .tql import (
    DEFAULT_THRESHOLDS,
    Level,
    QueryCatalog,
    bits_to_atoms,
    default_catalog,
    score_trace,
)
from .world import Action, ActionKind, Mode, SimParams, WorldState, default_policy, step


class MachineState(enum.Enum):
    AUTONOMOUS = "AUTONOMOUS"
    PLAN_ADAPTED = "PLAN_ADAPTED"
    ANNOUNCED = "ANNOUNCED"          # reserved, see module docstring
    AWAITING_ACK = "AWAITING_ACK"
    ESCALATED = "ESCALATED"
    HUMAN_CONTROL = "HUMAN_CONTROL"
    MINIMAL_RISK = "MINIMAL_RISK"
    DONE = "DONE"


PRE_CRITICAL = (MachineState.AUTONOMOUS, MachineState.PLAN_ADAPTED,
                MachineState.ANNOUNCED, MachineState.AWAITING_ACK,
                MachineState.ESCALATED)

_ALERT_STATES = (MachineState.ANNOUNCED, MachineState.AWAITING_ACK,
                 MachineState.ESCALATED)


class EventKind(enum.Enum):
    TICK = "TICK"
    CRITICALITY = "CRITICALITY"
    REPLAN_ADOPTED = "REPLAN_ADOPTED"
    ALERT_ISSUED = "ALERT_ISSUED"
    ESCALATION = "ESCALATION"
    ACK = "ACK"
    TAKEOVER = "TAKEOVER"
    HANDBACK = "HANDBACK"
    SAFE_STOP_STARTED = "SAFE_STOP_STARTED"
    STOPPED = "STOPPED"
    COMPLETED = "COMPLETED"


@dataclass(frozen=True)
class Event:
    seq: int
    t: float
    kind: EventKind
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "t": self.t, "kind": self.kind.value,
                           "payload": self.payload}, sort_keys=True)


def event_from_json(line: str) -> Event:
    doc = json.loads(line)
    return Event(seq=doc["seq"], t=doc["t"], kind=EventKind(doc["kind"]),
                 payload=doc["payload"])


@dataclass(frozen=True)
class TimingPolicy:
    t_transfer: float = 8.0      # required handover buffer
    t_ack: float = 5.0           # acknowledgement window per alert
    announce_lead: float = 20.0  # do not alert earlier than this before critical
    safe_margin: float = 1.0     # extra seconds on top of braking time

    def __post_init__(self) -> None:
        for name in ("t_transfer", "t_ack", "announce_lead", "safe_margin"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def t_safe(self, speed: float, a_max: float) -> float:
        """Seconds needed to execute a safe stop from `speed`."""
        return speed / a_max + self.safe_margin


class SessionFinished(Exception):
    pass


class InvalidTransition(Exception):
    def __init__(self, response_kind: str, state: MachineState):
        super().__init__(f"response {response_kind} not legal in state {state.value}")
        self.state = state


def select_modality(profile: DriverProfile, table: ReactionTable,
                    escalation_level: int) -> tuple[Modality, ...]:
    """Alert channel(s) for an escalation level.

    Level 0: fastest expected reaction for the driver's (load, condition);
    ties broken by preference score, then fixed order. Level 1: next-best
    distinct modality. Level 2: all three at once.
    """
    if escalation_level >= 2:
        return tuple(MODALITY_ORDER)
    ranked = sorted(
        MODALITY_ORDER,
        key=lambda m: (table.mean_ms(m, profile.load, profile.condition),
                       -table.preference(m), MODALITY_ORDER.index(m)))
    return (ranked[escalation_level],)


@dataclass
class _PendingResponse:
    due: float
    order: int
    kind: ResponseKind | str   # ResponseKind, or "HANDBACK"
    meta: dict


def response_legal(machine: MachineState, kind: ResponseKind | str) -> bool:
    """Whether a response kind has a transition edge from `machine`."""
    if kind == "HANDBACK":
        return machine is MachineState.HUMAN_CONTROL
    if kind is ResponseKind.ACK:
        return machine in _ALERT_STATES
    if kind is ResponseKind.TAKEOVER:
        return machine in PRE_CRITICAL
    return kind is ResponseKind.MISS


class HandoverSession:
    """One scenario run: world, machine state, timers, event log, driver."""

    def __init__(self, scenario: Scenario, *,
                 catalog: QueryCatalog | None = None,
                 timing: TimingPolicy | None = None,
                 reaction_table: ReactionTable | None = None,
                 templates: TemplateTable | None = None,
                 thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
                 slack: float = DEFAULT_PROGRESS_SLACK,
                 node_budget: int = DEFAULT_NODE_BUDGET,
                 seed: int | None = None,
                 scripted_driver: bool = True):
        self.scenario = scenario
        self.params: SimParams = scenario.params()
        self.world: WorldState = scenario.initial
        self.machine = MachineState.AUTONOMOUS
        self.catalog = catalog if catalog is not None else default_catalog()
        self.timing = timing if timing is not None else TimingPolicy()
        self.table = reaction_table if reaction_table is not None else default_reaction_table()
        self.templates = templates if templates is not None else default_templates()
        self.thresholds = thresholds
        self.slack = slack
        self.node_budget = node_budget
        self.profile: DriverProfile = scenario.driver
        self.rng = random.Random(seed if seed is not None else scenario.seed)
        self.scripted_driver = scripted_driver

        self.log: list[Event] = []
        self.t = 0.0
        self.plan_queue: list[Action] = []
        self.ack_deadline: float | None = None
        self.critical_at: float | None = None
        self.escalation_level = 0
        self.alert_modalities: list[Modality] = []
        self.first_alert_message = None
        self.budget_exhausted = False
        self._pending: list[_PendingResponse] = []
        self._pending_order = 0
        self._last_crit_key = None
        self._next_seq = 1   # seq 0 is reserved for transport-level headers

    # -- event log ------------------------------------------------------

    def _emit(self, kind: EventKind, t: float, payload: dict) -> Event:
        ev = Event(self._next_seq, round(t, 9), kind, payload)
        self._next_seq += 1
        self.log.append(ev)
        return ev

    # -- responses ------------------------------------------------------

    def queue_response(self, kind: ResponseKind | str, due: float,
                       meta: dict | None = None) -> None:
        """Queue a response for application at the next tick boundary."""
        self._pending.append(_PendingResponse(due, self._pending_order, kind,
                                              meta or {}))
        self._pending_order += 1
        self._pending.sort(key=lambda p: (p.due, p.order))

    def handle_response(self, kind: ResponseKind, t: float,
                        meta: dict | None = None) -> list[Event]:
        """Apply a driver response now (tick boundary). Returns new events."""
        if self.machine is MachineState.DONE:
            raise SessionFinished("session is finished")
        meta = meta or {}
        start = len(self.log)
        if kind is ResponseKind.ACK:
            if self.machine not in (MachineState.AWAITING_ACK,
                                    MachineState.ESCALATED,
                                    MachineState.ANNOUNCED):
                raise InvalidTransition("ACK", self.machine)
            self._emit(EventKind.ACK, t, meta)
            self._transfer_to_human(t)
        elif kind is ResponseKind.TAKEOVER:
            if self.machine not in PRE_CRITICAL:
                raise InvalidTransition("TAKEOVER", self.machine)
            self._transfer_to_human(t, meta)
        elif kind is ResponseKind.MISS:
            pass   # non-response: nothing to apply
        else:
            raise InvalidTransition(str(kind), self.machine)
        return self.log[start:]

    def handle_handback(self, t: float) -> list[Event]:
        """Driver offers control back; accepted only when the future is SAFE."""
        if self.machine is not MachineState.HUMAN_CONTROL:
            raise InvalidTransition("HANDBACK", self.machine)
        verdict = self._assess()
        if verdict.kind is VerdictKind.SAFE:
            self._emit(EventKind.HANDBACK, t, {"accepted": True})
            self.machine = MachineState.AUTONOMOUS
            self.world = replace(self.world, mode=Mode.AUTO)
        else:
            self._emit(EventKind.CRITICALITY, t, {
                "refused": "HANDBACK",
                "verdict": verdict.kind.value,
                "level": verdict.report.level.value,
                "score": verdict.report.score,
                "time_to_critical": verdict.report.time_to_critical,
            })
        return self.log[-1:]

    def _transfer_to_human(self, t: float, meta: dict | None = None) -> None:
        self._emit(EventKind.TAKEOVER, t, meta or {})
        self.machine = MachineState.HUMAN_CONTROL
        self.world = replace(self.world, mode=Mode.HUMAN)
        self.profile = update_vigilance(self.profile, self.params.dt,
                                        VigilanceEvent.TOOK_OVER)
        self.plan_queue = []
        self.ack_deadline = None
        self.critical_at = None
        self.escalation_level = 0

    # -- per-tick control -----------------------------------------------

    def _control_action(self) -> Action:
        m = self.machine
        if m is MachineState.MINIMAL_RISK:
            return Action(ActionKind.SAFE_STOP)
        if m is MachineState.HUMAN_CONTROL:
            return self._human_cruise()
        if m is MachineState.PLAN_ADAPTED and self.plan_queue:
            return self.plan_queue.pop(0)
        return default_policy(self.world, self.scenario.road, self.params)

    def _human_cruise(self) -> Action:
        """Scripted human: hold lane, track the segment target speed."""
        road = self.scenario.road
        target = min(road.speed_limit_at(self.world.position),
                     self.params.cruise_speed)
        speed, dt, a_max = self.world.speed, self.params.dt, self.params.a_max
        if speed > target:
            return Action(ActionKind.DECEL, min(a_max, (speed - target) / dt))
        if speed < target:
            return Action(ActionKind.ACCEL, min(a_max, (target - speed) / dt))
        return Action(ActionKind.HOLD)

    # -- monitoring -----------------------------------------------------

    def _assess(self) -> PlannerVerdict:
        return assess(self.world, self.scenario.road, self.params,
                      self.scenario.horizon, self.catalog, self.thresholds,
                      self.slack, self.node_budget)

    def _plan_still_valid(self) -> bool:
        """Re-simulate the remaining plan (padded with the default policy):
        it must still score LOW and still honor the progress-slack goal
        against a fresh default rollout, else it is stale."""
        params, road = self.params, self.scenario.road
        pack = road.pack
        pos, lane, speed = self.world.position, self.world.lane, self.world.speed
        health = self.world.sensor_health
        bits = [impl.abstract_kernel(pack, pos, lane, speed, health, params.dt,
                                     params.a_max, params.high_speed_threshold,
                                     params.obstacle_horizon)]
        steps = 0
        for action in self.plan_queue:
            if steps >= self.scenario.horizon or pos >= road.total_length:
                break
            if action.kind in (ActionKind.LANE_LEFT, ActionKind.LANE_RIGHT):
                cand = lane - 1 if action.kind is ActionKind.LANE_LEFT else lane + 1
                if not 0 <= cand < road.lanes_at(pos) or \
                        impl.span_blocked_kernel(pack, cand, pos, pos + speed * params.dt):
                    return False   # plan no longer applicable
            pos, lane, speed = impl.step_kernel(
                pos, lane, speed, int(action.kind), action.magnitude, params.dt,
                params.a_max, params.v_max, road.total_length)
            bits.append(impl.abstract_kernel(pack, pos, lane, speed, health,
                                             params.dt, params.a_max,
                                             params.high_speed_threshold,
                                             params.obstacle_horizon))
            steps += 1
        while steps < self.scenario.horizon and pos < road.total_length:
            kind, mag = impl.policy_kernel(pack, pos, lane, speed, params.dt,
                                           params.a_max, params.cruise_speed,
                                           params.obstacle_horizon)
            pos, lane, speed = impl.step_kernel(pos, lane, speed, kind, mag,
                                                params.dt, params.a_max,
                                                params.v_max, road.total_length)
            bits.append(impl.abstract_kernel(pack, pos, lane, speed, health,
                                             params.dt, params.a_max,
                                             params.high_speed_threshold,
                                             params.obstacle_horizon))
            steps += 1
        while len(bits) < self.scenario.horizon + 1:
            bits.append(bits[-1])
        report = score_trace([bits_to_atoms(b) for b in bits], self.catalog,
                             self.thresholds, self.params.dt)
        if report.level is not Level.LOW:
            return False
        fresh_default = rollout(self.world, road, params, self.scenario.horizon)
        return pos >= fresh_default.final_position - self.slack

    def _emit_criticality(self, level: Level, score: float, ttc: float | None,
                          verdict: str | None) -> None:
        key = (level, verdict, ttc is not None)
        payload = {"level": level.value, "score": score,
                   "time_to_critical": ttc, "verdict": verdict}
        if key != self._last_crit_key:
            self._emit(EventKind.CRITICALITY, self.t, payload)
            self._last_crit_key = key

    def _note_critical_time(self, ttc: float | None) -> None:
        if ttc is None:
            return
        predicted = self.t + ttc
        if self.critical_at is None or predicted < self.critical_at:
            self.critical_at = predicted

    def _start_minimal_risk(self, reason: str) -> None:
        self.machine = MachineState.MINIMAL_RISK
        self.plan_queue = []
        self.ack_deadline = None
        self._emit(EventKind.SAFE_STOP_STARTED, self.t, {"reason": reason})

    def _time_criticality_breach(self) -> bool:
        """True when the predicted critical moment is inside the safe-stop
        envelope for the current speed."""
        if self.critical_at is None:
            return False
        remaining = self.critical_at - self.t
        return remaining <= self.timing.t_safe(self.world.speed, self.params.a_max)

    # -- alert path -----------------------------------------------------

    def _grounded_facts(self, verdict: PlannerVerdict) -> list[Fact]:
        trace = rollout(self.world, self.scenario.road, self.params,
                        self.scenario.horizon)
        facts: dict[tuple, Fact] = {}
        order = {e.name: i for i, e in enumerate(self.catalog.entries)}
        severity = {r.name: r.severity for r in verdict.report.results}
        dt = self.params.dt
        tag_atoms = {"InFog": "FOG", "InTunnel": "TUNNEL",
                     "InConstruction": "CONSTRUCTION", "OnIce": "ICE"}
        for r in verdict.report.results:
            if not r.matched or r.step is None:
                continue
            j = min(r.step, len(trace.states) - 1)
            state_j = trace.states[j]
            props_j = trace.propositions[j]
            tte = max(j * dt, dt)
            distance = state_j.position - self.world.position
            for atom, tag in tag_atoms.items():
                if atom in props_j:
                    fact = hazard_fact(tag, severity[r.name], tte, distance,
                                       dt, order[r.name])
                    key = (Predicate.HAZARD, tag)
                    if key not in facts or facts[key].salience < fact.salience:
                        facts[key] = fact
            if "LaneBlocked" in props_j:
                obst = self.scenario.road.obstacle_distance(state_j.position,
                                                            state_j.lane)
                dist = distance + obst if obst is not None else distance
                fact = Fact(Predicate.OBSTACLE,
                            salience=severity[r.name] / tte,
                            distance=dist, time=tte, order=order[r.name])
                key = (Predicate.OBSTACLE, None)
                if key not in facts or facts[key].salience < fact.salience:
                    facts[key] = fact
            if "SensorDegraded" in props_j:
                fact = Fact(Predicate.SENSOR_LOSS,
                            salience=severity[r.name] / tte,
                            distance=distance, time=tte, order=order[r.name])
                key = (Predicate.SENSOR_LOSS, None)
                if key not in facts or facts[key].salience < fact.salience:
                    facts[key] = fact
        out = list(facts.values())
        if out:
            out.append(Fact(Predicate.ACTION_ADVICE, salience=0.25,
                            action="reduce speed", order=len(order)))
        return out

    def _issue_alert(self, verdict: PlannerVerdict, notice: float) -> None:
        modality = select_modality(self.profile, self.table, 0)[0]
        facts = self._grounded_facts(verdict)
        message = compose(verdict.report, facts, modality, notice,
                          self.profile.load, self.templates,
                          ack_window=self.timing.t_ack)
        self.machine = MachineState.AWAITING_ACK
        self.ack_deadline = self.t + self.timing.t_ack
        self.escalation_level = 0
        self.alert_modalities = [modality]
        if self.first_alert_message is None:
            self.first_alert_message = message
        self._emit(EventKind.ALERT_ISSUED, self.t, {
            "modality": modality.value,
            "message": message.text,
            "verbosity": message.verbosity.value,
            "word_count": message.word_count,
            "est_duration": message.est_duration,
            "facts": [f.predicate.value for f in message.facts_included],
            "notice": notice,
            "critical_at": self.critical_at,
            "ack_deadline": self.ack_deadline,
        })
        self.profile = update_vigilance(self.profile, self.params.dt,
                                        VigilanceEvent.ALERT)
        self._scripted_response(modality)

    def _escalate(self) -> None:
        self.escalation_level += 1
        modalities = select_modality(self.profile, self.table,
                                     self.escalation_level)
        self.machine = MachineState.ESCALATED
        self.ack_deadline = self.t + self.timing.t_ack
        self.alert_modalities.extend(m for m in modalities
                                     if m not in self.alert_modalities)
        self._emit(EventKind.ESCALATION, self.t, {
            "level": self.escalation_level,
            "modality": "+".join(m.value for m in modalities),
            "ack_deadline": self.ack_deadline,
        })
        self.profile = update_vigilance(self.profile, self.params.dt,
                                        VigilanceEvent.ALERT)
        best = min(modalities,
                   key=lambda m: (self.table.mean_ms(m, self.profile.load,
                                                     self.profile.condition),
                                  MODALITY_ORDER.index(m)))
        self._scripted_response(best)

    def _scripted_response(self, modality: Modality) -> None:
        if not self.scripted_driver:
            return
        response = respond(self.profile, (modality, self.t), self.table, self.rng)
        if response.kind is ResponseKind.ACK and response.latency_ms is not None:
            self.queue_response(ResponseKind.ACK,
                                self.t + response.latency_ms / 1000.0,
                                {"latency_ms": response.latency_ms,
                                 "source": "scripted"})

    # -- the tick -------------------------------------------------------

    def tick(self) -> list[Event]:
        """Advance one dt; returns the events this tick appended."""
        if self.machine is MachineState.DONE:
            raise SessionFinished("session is finished")
        start = len(self.log)
        t_next = (self.world.tick + 1) * self.params.dt

        # Queued responses arriving within this tick apply at its boundary.
        while self._pending and self._pending[0].due <= t_next:
            pending = self._pending.pop(0)
            try:
                if pending.kind == "HANDBACK":
                    self.handle_handback(pending.due)
                else:
                    self.handle_response(pending.kind, pending.due, pending.meta)
            except InvalidTransition:
                pass   # state moved on; stale response is dropped

        action = self._control_action()
        self.world = step(self.world, action, self.scenario.road, self.params)
        self.t = self.world.tick * self.params.dt
        self._emit(EventKind.TICK, self.t, {
            "position": self.world.position,
            "lane": self.world.lane,
            "speed": self.world.speed,
            "machine": self.machine.value,
            "action": action.kind.name,
        })
        self.profile = update_vigilance(self.profile, self.params.dt,
                                        VigilanceEvent.NONE)

        if self.machine is MachineState.MINIMAL_RISK and self.world.speed == 0.0:
            self._emit(EventKind.STOPPED, self.t, {"position": self.world.position})
            self.machine = MachineState.DONE
            return self.log[start:]
        if self.world.position >= self.scenario.road.total_length:
            self._emit(EventKind.COMPLETED, self.t, {"position": self.world.position})
            self.machine = MachineState.DONE
            return self.log[start:]

        if self.machine in (MachineState.AUTONOMOUS, MachineState.PLAN_ADAPTED):
            self._monitor()
        elif self.machine in (MachineState.AWAITING_ACK, MachineState.ESCALATED):
            self._alert_phase()
        return self.log[start:]

    def _monitor(self) -> None:
        if self.machine is MachineState.PLAN_ADAPTED and self.plan_queue \
                and self._plan_still_valid():
            return   # adopted plan still clean and progressing; keep executing
        verdict = self._assess()
        self.budget_exhausted = self.budget_exhausted or verdict.budget_exhausted
        report = verdict.report
        self._emit_criticality(report.level, report.score,
                               report.time_to_critical, verdict.kind.value)
        if verdict.kind is VerdictKind.SAFE:
            self.machine = MachineState.AUTONOMOUS
            self.plan_queue = []
            self.critical_at = None
            return
        if verdict.kind is VerdictKind.AVOIDABLE:
            assert verdict.plan is not None
            self.plan_queue = list(verdict.plan.actions)
            self.machine = MachineState.PLAN_ADAPTED
            self.critical_at = None
            self._emit(EventKind.REPLAN_ADOPTED, self.t, {
                "plan_length": len(verdict.plan.actions),
                "cost": verdict.plan.cost,
            })
            return
        # UNAVOIDABLE
        self.plan_queue = []
        self.machine = MachineState.AUTONOMOUS if self.machine is MachineState.PLAN_ADAPTED else self.machine
        ttc = time_to_critical(verdict, self.params.dt)
        self._note_critical_time(ttc)
        if self._time_criticality_breach():
            self._start_minimal_risk("insufficient_notice")
            return
        assert self.critical_at is not None
        notice = (self.critical_at - self.t) - self.timing.t_transfer
        if 0 < notice <= self.timing.announce_lead:
            self._issue_alert(verdict, notice)
        elif notice <= 0:
            self._start_minimal_risk("insufficient_notice")

    def _alert_phase(self) -> None:
        trace = rollout(self.world, self.scenario.road, self.params,
                        self.scenario.horizon)
        report = score_trace(trace.propositions, self.catalog, self.thresholds,
                             self.params.dt)
        self._emit_criticality(report.level, report.score,
                               report.time_to_critical, None)
        self._note_critical_time(report.time_to_critical)
        if self._time_criticality_breach():
            self._start_minimal_risk("no_response" if self.escalation_level >= 2
                                     else "insufficient_notice")
            return
        if self.ack_deadline is not None and self.t >= self.ack_deadline:
            if self.escalation_level < 2:
                self._escalate()
            else:
                self._start_minimal_risk("no_response")

    # -- introspection ----------------------------------------------------

    @property
    def done(self) -> bool:
        return self.machine is MachineState.DONE

    def state_snapshot(self) -> dict:
        return {
            "machine": self.machine.value,
            "t": self.t,
            "position": self.world.position,
            "lane": self.world.lane,
            "speed": self.world.speed,
            "mode": self.world.mode.value,
            "vigilance": self.profile.vigilance,
            "ack_deadline": self.ack_deadline,
            "critical_at": self.critical_at,
            "escalation_level": self.escalation_level,
            "seq": self.log[-1].seq if self.log else 0,
        }


# -- running and metrics --------------------------------------------------


def run_session(scenario: Scenario, *, max_ticks: int = 100_000,
                **kwargs) -> HandoverSession:
    """Run a session to DONE. The tick cap guards against degenerate
    scenarios that neither finish nor stop; hitting it raises."""
    session = HandoverSession(scenario, **kwargs)
    for _ in range(max_ticks):
        if session.done:
            return session
        session.tick()
    if not session.done:
        raise RuntimeError(f"scenario {scenario.name!r} did not finish "
                           f"within {max_ticks} ticks")
    return session


@dataclass(frozen=True)
class MetricsReport:
    end_state: str | None
    ticks: int
    final_position: float | None
    final_speed: float | None
    notice_lead_time: float | None
    handovers_avoided: int
    safe_stops: int
    escalations: int
    alerts: int
    message_words: tuple[int, ...]
    takeover_latency: float | None
    verdict_counts: dict

    def to_dict(self) -> dict:
        return {
            "end_state": self.end_state,
            "ticks": self.ticks,
            "final_position": self.final_position,
            "final_speed": self.final_speed,
            "notice_lead_time": self.notice_lead_time,
            "handovers_avoided": self.handovers_avoided,
            "safe_stops": self.safe_stops,
            "escalations": self.escalations,
            "alerts": self.alerts,
            "message_words": list(self.message_words),
            "takeover_latency": self.takeover_latency,
            "verdict_counts": self.verdict_counts,
        }


def metrics(log: Sequence[Event]) -> MetricsReport:
    """Aggregate a complete session log."""
    end_state = None
    ticks = 0
    final_position = final_speed = None
    first_alert_t = None
    first_alert_critical = None
    takeover_t = None
    words = []
    handovers_avoided = safe_stops = escalations = alerts = 0
    verdict_counts: dict[str, int] = {}
    for ev in log:
        if ev.kind is EventKind.TICK:
            ticks += 1
            final_position = ev.payload.get("position")
            final_speed = ev.payload.get("speed")
        elif ev.kind is EventKind.ALERT_ISSUED:
            alerts += 1
            words.append(ev.payload.get("word_count", 0))
            if first_alert_t is None:
                first_alert_t = ev.t
                first_alert_critical = ev.payload.get("critical_at")
        elif ev.kind is EventKind.REPLAN_ADOPTED:
            handovers_avoided += 1
        elif ev.kind is EventKind.SAFE_STOP_STARTED:
            safe_stops += 1
        elif ev.kind is EventKind.ESCALATION:
            escalations += 1
        elif ev.kind is EventKind.TAKEOVER:
            if takeover_t is None:
                takeover_t = ev.t
        elif ev.kind is EventKind.CRITICALITY:
            verdict = ev.payload.get("verdict")
            if verdict:
                verdict_counts[verdict] = verdict_counts.get(verdict, 0) + 1
        elif ev.kind in (EventKind.STOPPED, EventKind.COMPLETED):
            end_state = ev.kind.value
    notice_lead = None
    if first_alert_t is not None and first_alert_critical is not None:
        notice_lead = first_alert_critical - first_alert_t
    takeover_latency = None
    if takeover_t is not None and first_alert_t is not None:
        takeover_latency = takeover_t - first_alert_t
    return MetricsReport(
        end_state=end_state, ticks=ticks, final_position=final_position,
        final_speed=final_speed, notice_lead_time=notice_lead,
        handovers_avoided=handovers_avoided, safe_stops=safe_stops,
        escalations=escalations, alerts=alerts, message_words=tuple(words),
        takeover_latency=takeover_latency, verdict_counts=verdict_counts)


def write_event_log(events: Iterable[Event], fh: IO[str]) -> None:
    for ev in events:
        fh.write(ev.to_json())
        fh.write("\n")


def read_event_log(fh: IO[str]) -> list[Event]:
    return [event_from_json(line) for line in fh if line.strip()]


def tick_states(log: Sequence[Event]) -> list[tuple[float, int, float]]:
    """(position, lane, speed) sequence from the TICK events, for replay checks."""
    return [(ev.payload["position"], ev.payload["lane"], ev.payload["speed"])
            for ev in log if ev.kind is EventKind.TICK]
