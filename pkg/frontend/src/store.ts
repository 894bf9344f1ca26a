// Pure event-fold view state. The client never simulates: everything shown
// derives from the ordered event stream, so replaying the full log always
// reproduces the same view.

import type { ScenarioEcho, SessionEvent } from "./types.js";

export interface Banner {
  text: string;
  modality: string;
  issuedAt: number;
  ackDeadline: number | null;
}

export interface ViewState {
  scenario: ScenarioEcho | null;
  sessionId: string | null;
  machine: string;
  t: number;
  position: number;
  lane: number;
  speed: number;
  banner: Banner | null;
  overlay: string | null;
  criticalAt: number | null;
  ackDeadline: number | null;
  criticality: { level: string; score: number } | null;
  escalationModalities: string[];
  rejection: string | null;   // toast text for a refused action
  pendingAction: boolean;     // a posted response not yet confirmed by events
  lastSeq: number;
}

export function initialView(): ViewState {
  return {
    scenario: null,
    sessionId: null,
    machine: "AUTONOMOUS",
    t: 0,
    position: 0,
    lane: 0,
    speed: 0,
    banner: null,
    overlay: null,
    criticalAt: null,
    ackDeadline: null,
    criticality: null,
    escalationModalities: [],
    rejection: null,
    pendingAction: false,
    lastSeq: -1,
  };
}

export function reduce(view: ViewState, ev: SessionEvent): ViewState {
  const next: ViewState = { ...view, lastSeq: Math.max(view.lastSeq, ev.seq) };
  const p = ev.payload ?? {};
  switch (ev.kind) {
    case "SESSION":
      next.scenario = p.scenario as ScenarioEcho;
      next.sessionId = (p.id as string) ?? null;
      if (next.scenario) {
        next.position = next.scenario.initial.position;
        next.lane = next.scenario.initial.lane;
        next.speed = next.scenario.initial.speed;
      }
      break;
    case "TICK":
      next.t = ev.t;
      next.position = p.position as number;
      next.lane = p.lane as number;
      next.speed = p.speed as number;
      next.machine = p.machine as string;
      break;
    case "CRITICALITY":
      next.t = ev.t;
      next.criticality = { level: p.level as string, score: p.score as number };
      if (p.refused) {
        next.rejection = `Hand back refused: predicted criticality ${p.level}`;
        next.pendingAction = false;
      }
      break;
    case "ALERT_ISSUED":
      next.machine = "AWAITING_ACK";
      next.banner = {
        text: p.message as string,
        modality: p.modality as string,
        issuedAt: ev.t,
        ackDeadline: (p.ack_deadline as number) ?? null,
      };
      next.ackDeadline = (p.ack_deadline as number) ?? null;
      next.criticalAt = (p.critical_at as number) ?? null;
      next.escalationModalities = [p.modality as string];
      break;
    case "ESCALATION":
      next.machine = "ESCALATED";
      next.ackDeadline = (p.ack_deadline as number) ?? null;
      next.escalationModalities = [...view.escalationModalities,
                                   p.modality as string];
      if (next.banner) {
        next.banner = { ...next.banner, modality: p.modality as string,
                        ackDeadline: next.ackDeadline };
      }
      break;
    case "ACK":
      next.pendingAction = false;
      break;
    case "TAKEOVER":
      next.machine = "HUMAN_CONTROL";
      next.banner = null;
      next.ackDeadline = null;
      next.criticalAt = null;
      next.pendingAction = false;
      break;
    case "HANDBACK":
      next.machine = "AUTONOMOUS";
      next.pendingAction = false;
      break;
    case "SAFE_STOP_STARTED":
      next.machine = "MINIMAL_RISK";
      next.banner = null;
      next.ackDeadline = null;
      break;
    case "STOPPED":
      next.machine = "DONE";
      next.overlay = "Vehicle stopped safely";
      break;
    case "COMPLETED":
      next.machine = "DONE";
      next.overlay = "Route completed";
      break;
  }
  return next;
}

export function replay(events: SessionEvent[]): ViewState {
  return events.reduce(reduce, initialView());
}
