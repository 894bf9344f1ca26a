"""Local HTTP API exposing live handover sessions.

Sessions run either stepped (ticks only on request, deterministic
walkthroughs for UIs and tests) or realtime (a background thread ticks at
dt wall seconds). Events stream with at-least-once, dedup-by-seq delivery:
the log is append-only, a reconnecting subscriber passes the last seq it
saw and misses nothing.

Delivery seq 0 is a transport-level session header carrying the scenario
echo; orchestrator events start at seq 1.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .driver import ResponseKind
from .orchestrator import (
    Event,
    HandoverSession,
    InvalidTransition,
    SessionFinished,
    response_legal,
)
from .scenario import ScenarioSyntaxError, ValidationError, parse_scenario, scenario_to_dict

MAX_STEP_BATCH = 10_000
STREAM_POLL_SECONDS = 0.25


def _event_dict(ev: Event) -> dict:
    return {"seq": ev.seq, "t": ev.t, "kind": ev.kind.value, "payload": ev.payload}


class SessionRuntime:
    def __init__(self, session: HandoverSession, mode: str, session_id: str):
        self.session = session
        self.mode = mode
        self.id = session_id
        self.lock = threading.RLock()
        self.changed = threading.Condition(self.lock)
        self.stopped = False
        # Refreshed after every mutation; read without the lock so slow
        # ticks (planning) never starve state polls.
        self.last_snapshot: dict = session.state_snapshot()
        self.header = {
            "seq": 0,
            "t": 0.0,
            "kind": "SESSION",
            "payload": {"id": session_id, "mode": mode,
                        "scenario": scenario_to_dict(session.scenario)},
        }
        self._thread: threading.Thread | None = None

    # All mutation happens under the lock; event reads take a snapshot.

    def events_since(self, since: int) -> list[dict]:
        with self.lock:
            out = []
            if since < 0:
                out.append(self.header)
            out.extend(_event_dict(ev) for ev in self.session.log if ev.seq > since)
            return out

    def last_seq(self) -> int:
        with self.lock:
            return self.session.log[-1].seq if self.session.log else 0

    def step(self, n: int) -> list[dict]:
        with self.changed:
            new: list[dict] = []
            for _ in range(n):
                if self.session.done:
                    break
                new.extend(_event_dict(ev) for ev in self.session.tick())
            self.last_snapshot = self.session.state_snapshot()
            self.changed.notify_all()
            return new

    def apply_response(self, kind: str, meta: dict) -> list[dict]:
        """Apply a response at the current boundary (stepped sessions sit at
        one between ticks)."""
        with self.changed:
            session = self.session
            if kind == "handback":
                events = session.handle_handback(session.t)
            else:
                rk = ResponseKind.ACK if kind == "ack" else ResponseKind.TAKEOVER
                events = session.handle_response(rk, session.t, meta)
            self.last_snapshot = session.state_snapshot()
            self.changed.notify_all()
            return [_event_dict(ev) for ev in events]

    def queue_response(self, kind: str, meta: dict) -> None:
        """Queue a response; the ticker applies it at the next boundary."""
        with self.changed:
            session = self.session
            if kind == "handback":
                session.queue_response("HANDBACK", session.t, meta)
            else:
                rk = ResponseKind.ACK if kind == "ack" else ResponseKind.TAKEOVER
                session.queue_response(rk, session.t, meta)
            self.changed.notify_all()

    def start_realtime(self) -> None:
        def loop() -> None:
            dt = self.session.params.dt
            while True:
                time.sleep(dt)
                with self.changed:
                    if self.stopped or self.session.done:
                        self.changed.notify_all()
                        return
                    self.session.tick()
                    self.last_snapshot = self.session.state_snapshot()
                    self.changed.notify_all()

        self._thread = threading.Thread(target=loop, daemon=True,
                                        name=f"session-{self.id}")
        self._thread.start()

    def shutdown(self) -> None:
        with self.changed:
            self.stopped = True
            self.changed.notify_all()


class CreateSession(BaseModel):
    scenario: dict
    mode: str = "stepped"
    driver: str = "none"
    seed: int | None = None


class StepRequest(BaseModel):
    n: int = 1


class ResponseRequest(BaseModel):
    kind: str
    metadata: dict | None = None   # e.g. secondary-task score, free-form


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


def create_app(static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="handover session service")
    runtimes: dict[str, SessionRuntime] = {}

    def get_runtime(session_id: str) -> SessionRuntime | None:
        return runtimes.get(session_id)

    @app.on_event("shutdown")
    def stop_tickers() -> None:
        for runtime in runtimes.values():
            runtime.shutdown()

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSession):
        if body.mode not in ("stepped", "realtime"):
            return _error(400, f"unknown mode {body.mode!r}")
        if body.driver not in ("scripted", "none"):
            return _error(400, f"unknown driver {body.driver!r}")
        try:
            scenario = parse_scenario(json.dumps(body.scenario))
        except ScenarioSyntaxError as exc:
            return _error(400, str(exc))
        except ValidationError as exc:
            return _error(400, str(exc), path=exc.path)
        session = HandoverSession(scenario, seed=body.seed,
                                  scripted_driver=body.driver == "scripted")
        session_id = uuid.uuid4().hex
        runtime = SessionRuntime(session, body.mode, session_id)
        runtimes[session_id] = runtime
        if body.mode == "realtime":
            runtime.start_realtime()
        return {"id": session_id, "mode": body.mode,
                "state": session.state_snapshot()}

    @app.get("/api/sessions/{session_id}/state")
    def get_state(session_id: str):
        runtime = get_runtime(session_id)
        if runtime is None:
            return _error(404, "unknown session")
        # Lock-free read of the cached snapshot: a slow tick must not
        # block state polls.
        return {"id": session_id, "mode": runtime.mode,
                "state": runtime.last_snapshot}

    @app.post("/api/sessions/{session_id}/step")
    def step_session(session_id: str, body: StepRequest):
        runtime = get_runtime(session_id)
        if runtime is None:
            return _error(404, "unknown session")
        if runtime.mode != "stepped":
            return _error(409, "only stepped sessions accept step requests")
        if runtime.session.done:
            return _error(410, "session is finished")
        n = max(1, min(body.n, MAX_STEP_BATCH))
        events = runtime.step(n)
        with runtime.lock:
            state = runtime.session.state_snapshot()
        return {"events": events, "state": state}

    @app.post("/api/sessions/{session_id}/response")
    def post_response(session_id: str, body: ResponseRequest):
        runtime = get_runtime(session_id)
        if runtime is None:
            return _error(404, "unknown session")
        if body.kind not in ("ack", "takeover", "handback"):
            return _error(400, f"unknown response kind {body.kind!r}")
        with runtime.lock:
            session = runtime.session
            if session.done:
                return _error(410, "session is finished")
            # A human responder takes over from the scripted one for good.
            session.scripted_driver = False
            rk = {"ack": ResponseKind.ACK, "takeover": ResponseKind.TAKEOVER,
                  "handback": "HANDBACK"}[body.kind]
            if not response_legal(session.machine, rk):
                return _error(409, f"response {body.kind} not legal in state "
                                   f"{session.machine.value}",
                              state=session.machine.value)
            meta = {"source": "human", **(body.metadata or {})}
            if runtime.mode == "stepped":
                try:
                    events = runtime.apply_response(body.kind, meta)
                except InvalidTransition as exc:
                    return _error(409, str(exc), state=session.machine.value)
                except SessionFinished:
                    return _error(410, "session is finished")
                return {"events": events, "state": session.state_snapshot()}
            runtime.queue_response(body.kind, meta)
            return {"queued": True, "events": [],
                    "state": session.state_snapshot()}

    @app.get("/api/sessions/{session_id}/events")
    def get_events(session_id: str, request: Request, since: int = -1):
        runtime = get_runtime(session_id)
        if runtime is None:
            return _error(404, "unknown session")
        accept = request.headers.get("accept", "")
        if "text/event-stream" not in accept:
            return {"events": runtime.events_since(since)}

        def stream():
            cursor = since
            while True:
                with runtime.changed:
                    batch = runtime.events_since(cursor)
                    done = runtime.session.done or runtime.stopped
                    if not batch and not done:
                        runtime.changed.wait(STREAM_POLL_SECONDS)
                        batch = runtime.events_since(cursor)
                        done = runtime.session.done or runtime.stopped
                for ev in batch:
                    cursor = max(cursor, ev["seq"])
                    yield f"id: {ev['seq']}\ndata: {json.dumps(ev, sort_keys=True)}\n\n"
                if done and not batch:
                    yield "event: end\ndata: {}\n\n"
                    return
                if not batch:
                    # Heartbeat: keeps proxies happy and gives the framework a
                    # point to deliver client-disconnect cancellation.
                    yield ": ping\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    root = _resolve_static(static_dir)
    if root is not None:
        app.mount("/", StaticFiles(directory=root, html=True), name="ui")
    return app


def _resolve_static(static_dir: str | Path | None) -> Path | None:
    candidates = []
    if static_dir is not None:
        candidates.append(Path(static_dir))
    candidates.append(Path.cwd() / "frontend" / "dist")
    candidates.append(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    for cand in candidates:
        if cand.is_dir():
            return cand
    return None
