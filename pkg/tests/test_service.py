from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from handover.service import create_app

from .conftest import AVOIDABLE_PATH, PACK_DIR


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


def scenario_doc(name="tunnel_dead_zone"):
    return json.loads((PACK_DIR / f"{name}.json").read_text())


def create(client, mode="stepped", driver="none", name="tunnel_dead_zone"):
    r = client.post("/api/sessions",
                    json={"scenario": scenario_doc(name), "mode": mode,
                          "driver": driver})
    assert r.status_code == 201, r.text
    return r.json()["id"]


def step_until(client, sid, predicate, limit=200):
    """Step one tick at a time until predicate(state) or the limit."""
    for _ in range(limit):
        r = client.post(f"/api/sessions/{sid}/step", json={"n": 1})
        if r.status_code == 410:
            break
        state = r.json()["state"]
        if predicate(state):
            return state
    raise AssertionError("predicate never satisfied")


class TestCreate:
    def test_create_returns_autonomous_session(self, client):
        r = client.post("/api/sessions",
                        json={"scenario": scenario_doc(), "mode": "stepped"})
        assert r.status_code == 201
        body = r.json()
        assert body["state"]["machine"] == "AUTONOMOUS"
        assert body["id"]

    def test_invalid_scenario_names_field(self, client):
        doc = scenario_doc()
        doc["segments"][0]["tags"] = ["LAVA"]
        r = client.post("/api/sessions", json={"scenario": doc, "mode": "stepped"})
        assert r.status_code == 400
        assert "segments[0].tags" in r.json()["error"]

    def test_distinct_ids(self, client):
        assert create(client) != create(client)

    def test_unknown_session_404(self, client):
        assert client.get("/api/sessions/nope/state").status_code == 404


class TestStepAndEvents:
    def test_step_produces_events(self, client):
        sid = create(client)
        r = client.post(f"/api/sessions/{sid}/step", json={"n": 3})
        events = r.json()["events"]
        assert [e["kind"] for e in events].count("TICK") == 3
        assert [e["seq"] for e in events] == sorted(e["seq"] for e in events)

    def test_events_since_semantics(self, client):
        sid = create(client)
        client.post(f"/api/sessions/{sid}/step", json={"n": 5})
        all_events = client.get(f"/api/sessions/{sid}/events").json()["events"]
        assert all_events[0]["kind"] == "SESSION"   # seq-0 header
        assert all_events[0]["seq"] == 0
        since0 = client.get(f"/api/sessions/{sid}/events?since=0").json()["events"]
        assert len(since0) == len(all_events) - 1
        since3 = client.get(f"/api/sessions/{sid}/events?since=3").json()["events"]
        assert all(e["seq"] > 3 for e in since3)
        assert [e["seq"] for e in all_events] == list(range(len(all_events)))

    def test_two_subscribers_identical(self, client):
        sid = create(client)
        client.post(f"/api/sessions/{sid}/step", json={"n": 4})
        a = client.get(f"/api/sessions/{sid}/events").json()["events"]
        b = client.get(f"/api/sessions/{sid}/events").json()["events"]
        assert a == b

    def test_sse_stream_replays_finished_session(self, client):
        doc = scenario_doc()
        doc["segments"] = [{"length": 50.0, "lanes": 1, "speed_limit": 33.0}]
        doc["initial"] = {"position": 0.0, "lane": 0, "speed": 30.0}
        r = client.post("/api/sessions", json={"scenario": doc, "mode": "stepped"})
        sid = r.json()["id"]
        while True:
            r = client.post(f"/api/sessions/{sid}/step", json={"n": 5})
            if r.status_code == 410 or r.json()["state"]["machine"] == "DONE":
                break
        # The generator terminates at DONE, so the whole stream can be read.
        r = client.get(f"/api/sessions/{sid}/events?since=-1",
                       headers={"accept": "text/event-stream"})
        assert r.headers["content-type"].startswith("text/event-stream")
        frames = [json.loads(line[6:]) for line in r.text.splitlines()
                  if line.startswith("data: ") and line != "data: {}"]
        assert frames[0]["kind"] == "SESSION"
        assert [f["seq"] for f in frames] == list(range(len(frames)))
        assert frames[-1]["kind"] == "COMPLETED"
        assert "event: end" in r.text


class TestResponses:
    def test_ack_while_autonomous_conflicts(self, client):
        sid = create(client)
        r = client.post(f"/api/sessions/{sid}/response", json={"kind": "ack"})
        assert r.status_code == 409
        assert r.json()["state"] == "AUTONOMOUS"

    def test_ack_during_awaiting_ack_transfers_control(self, client):
        sid = create(client)
        state = step_until(client, sid,
                           lambda s: s["machine"] == "AWAITING_ACK")
        r = client.post(f"/api/sessions/{sid}/response", json={"kind": "ack"})
        assert r.status_code == 200
        kinds = [e["kind"] for e in r.json()["events"]]
        assert kinds == ["ACK", "TAKEOVER"]
        assert r.json()["state"]["machine"] == "HUMAN_CONTROL"

    def test_takeover_any_precritical(self, client):
        sid = create(client)
        client.post(f"/api/sessions/{sid}/step", json={"n": 2})
        r = client.post(f"/api/sessions/{sid}/response", json={"kind": "takeover"})
        assert r.status_code == 200
        assert r.json()["state"]["machine"] == "HUMAN_CONTROL"

    def test_handback_rejected_when_unsafe(self, client):
        sid = create(client)
        step_until(client, sid, lambda s: s["machine"] == "AWAITING_ACK")
        client.post(f"/api/sessions/{sid}/response", json={"kind": "ack"})
        r = client.post(f"/api/sessions/{sid}/response", json={"kind": "handback"})
        # still heading into the dead zone: orchestrator refuses via event
        assert r.status_code == 200
        kinds = [e["kind"] for e in r.json()["events"]]
        assert kinds == ["CRITICALITY"]
        assert r.json()["state"]["machine"] == "HUMAN_CONTROL"

    def test_response_to_finished_session_410(self, client):
        sid = create(client, name="blocked_road", driver="none")
        for _ in range(100):
            r = client.post(f"/api/sessions/{sid}/step", json={"n": 5})
            if r.status_code == 410 or r.json()["state"]["machine"] == "DONE":
                break
        r = client.post(f"/api/sessions/{sid}/response", json={"kind": "ack"})
        assert r.status_code == 410

    def test_human_disables_scripted_responder(self, client):
        sid = create(client, driver="scripted")
        client.post(f"/api/sessions/{sid}/step", json={"n": 1})
        client.post(f"/api/sessions/{sid}/response", json={"kind": "takeover"})
        events = client.get(f"/api/sessions/{sid}/events?since=0").json()["events"]
        sources = [e["payload"].get("source") for e in events
                   if e["kind"] == "TAKEOVER"]
        assert sources == ["human"]


class TestLivePush:
    def test_sse_pushes_events_as_they_occur(self):
        """Against a real server: a subscriber sees ticks pushed live."""
        import socket
        import threading
        import time

        import httpx
        import uvicorn

        app = create_app()
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        config = uvicorn.Config(app, host="127.0.0.1", port=port,
                                log_level="error")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.time() + 10.0
            while not server.started:
                assert time.time() < deadline, "server did not start"
                time.sleep(0.02)
            base = f"http://127.0.0.1:{port}"
            doc = scenario_doc()
            doc["segments"] = [{"length": 400.0, "lanes": 1, "speed_limit": 33.0}]
            doc["initial"] = {"position": 0.0, "lane": 0, "speed": 30.0}
            sid = httpx.post(f"{base}/api/sessions",
                             json={"scenario": doc, "mode": "stepped"},
                             timeout=5.0).json()["id"]

            def stepper():
                time.sleep(0.3)
                for _ in range(3):
                    try:
                        httpx.post(f"{base}/api/sessions/{sid}/step",
                                   json={"n": 1}, timeout=10.0)
                    except httpx.HTTPError:
                        return
                    time.sleep(0.1)

            threading.Thread(target=stepper, daemon=True).start()
            collected = []
            with httpx.stream("GET", f"{base}/api/sessions/{sid}/events?since=0",
                              headers={"accept": "text/event-stream"},
                              timeout=15.0) as r:
                for line in r.iter_lines():
                    if line.startswith("data: ") and line != "data: {}":
                        collected.append(json.loads(line[6:]))
                    if len(collected) >= 3:
                        break
            assert [e["seq"] for e in collected] == [1, 2, 3]
            assert any(e["kind"] == "TICK" for e in collected)
        finally:
            server.should_exit = True
            thread.join(timeout=5.0)


class TestRealtime:
    def test_realtime_ticks_on_its_own(self, client):
        import time
        doc = scenario_doc()
        doc["dt"] = 0.02
        doc["segments"] = [{"length": 40.0, "lanes": 1, "speed_limit": 33.0}]
        doc["initial"] = {"position": 0.0, "lane": 0, "speed": 30.0}
        r = client.post("/api/sessions", json={"scenario": doc, "mode": "realtime"})
        sid = r.json()["id"]
        deadline = time.time() + 5.0
        while time.time() < deadline:
            state = client.get(f"/api/sessions/{sid}/state").json()["state"]
            if state["machine"] == "DONE":
                break
            time.sleep(0.05)
        assert state["machine"] == "DONE"

    def test_step_rejected_for_realtime(self, client):
        doc = scenario_doc()
        doc["dt"] = 0.02
        doc["segments"] = [{"length": 40.0, "lanes": 1, "speed_limit": 33.0}]
        doc["initial"] = {"position": 0.0, "lane": 0, "speed": 30.0}
        r = client.post("/api/sessions", json={"scenario": doc, "mode": "realtime"})
        sid = r.json()["id"]
        assert client.post(f"/api/sessions/{sid}/step",
                           json={"n": 1}).status_code == 409
