// Wire types mirroring the session service API.

export interface SessionEvent {
  seq: number;
  t: number;
  kind: string;
  payload: Record<string, any>;
}

export interface StateSnapshot {
  machine: string;
  t: number;
  position: number;
  lane: number;
  speed: number;
  mode: string;
  vigilance: number;
  ack_deadline: number | null;
  critical_at: number | null;
  escalation_level: number;
  seq: number;
}

export interface ObstacleEcho {
  lane: number;
  at: number;
}

export interface SegmentEcho {
  length: number;
  lanes: number;
  speed_limit: number;
  tags: string[];
  obstacles: ObstacleEcho[];
}

export interface ScenarioEcho {
  name: string;
  cruise_speed: number;
  horizon: number;
  seed: number;
  dt: number;
  initial: { position: number; lane: number; speed: number };
  segments: SegmentEcho[];
}

export type ResponseKind = "ack" | "takeover" | "handback";
