// Thin client for the session service. Event subscription prefers SSE and
// falls back to long-polling where EventSource is unavailable (tests run
// under node); both paths resume from the last seen seq, so a reconnect
// loses nothing.

import type { ResponseKind, SessionEvent, StateSnapshot } from "./types.js";

export class ConflictError extends Error {
  state: string;
  constructor(message: string, state: string) {
    super(message);
    this.state = state;
  }
}

async function jsonOrThrow(resp: Response): Promise<any> {
  const body = await resp.json().catch(() => ({}));
  if (resp.status === 409) {
    throw new ConflictError(body.error ?? "conflict", body.state ?? "unknown");
  }
  if (!resp.ok) {
    throw new Error(body.error ?? `HTTP ${resp.status}`);
  }
  return body;
}

export class SessionApi {
  constructor(readonly base: string = "") {}

  async createSession(scenario: unknown, mode: "stepped" | "realtime",
                      driver: "scripted" | "none" = "none"):
      Promise<{ id: string; state: StateSnapshot }> {
    const resp = await fetch(`${this.base}/api/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scenario, mode, driver }),
    });
    return jsonOrThrow(resp);
  }

  async step(id: string, n = 1):
      Promise<{ events: SessionEvent[]; state: StateSnapshot }> {
    const resp = await fetch(`${this.base}/api/sessions/${id}/step`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ n }),
    });
    return jsonOrThrow(resp);
  }

  async postResponse(id: string, kind: ResponseKind,
                     metadata?: Record<string, unknown>):
      Promise<{ events: SessionEvent[]; state: StateSnapshot }> {
    const resp = await fetch(`${this.base}/api/sessions/${id}/response`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(metadata ? { kind, metadata } : { kind }),
    });
    return jsonOrThrow(resp);
  }

  async getState(id: string): Promise<{ state: StateSnapshot }> {
    return jsonOrThrow(await fetch(`${this.base}/api/sessions/${id}/state`));
  }

  async getEvents(id: string, since = -1): Promise<SessionEvent[]> {
    const resp = await fetch(
      `${this.base}/api/sessions/${id}/events?since=${since}`);
    const body = await jsonOrThrow(resp);
    return body.events as SessionEvent[];
  }

  /** Subscribe from `since`; returns an unsubscribe function. */
  subscribe(id: string, since: number, onEvent: (ev: SessionEvent) => void,
            onStatus?: (status: "open" | "degraded") => void): () => void {
    let lastSeq = since;
    let closed = false;

    if (typeof EventSource !== "undefined") {
      let source: EventSource | null = null;
      const connect = () => {
        if (closed) return;
        source = new EventSource(
          `${this.base}/api/sessions/${id}/events?since=${lastSeq}`);
        source.onopen = () => onStatus?.("open");
        source.onmessage = (msg) => {
          const ev = JSON.parse(msg.data) as SessionEvent;
          if (ev && typeof ev.seq === "number" && ev.seq > lastSeq) {
            lastSeq = ev.seq;
            onEvent(ev);
          }
        };
        source.onerror = () => {
          onStatus?.("degraded");
          source?.close();
          // Reconnect from the last seen seq: dedup-by-seq, nothing lost.
          setTimeout(connect, 1000);
        };
      };
      connect();
      return () => {
        closed = true;
        source?.close();
      };
    }

    const poll = async () => {
      while (!closed) {
        try {
          const events = await this.getEvents(id, lastSeq);
          onStatus?.("open");
          for (const ev of events) {
            if (ev.seq > lastSeq) {
              lastSeq = ev.seq;
              onEvent(ev);
            }
          }
        } catch {
          onStatus?.("degraded");
        }
        await new Promise((resolve) => setTimeout(resolve, 250));
      }
    };
    void poll();
    return () => {
      closed = true;
    };
  }
}
