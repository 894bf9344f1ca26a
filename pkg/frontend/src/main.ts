// Wire the store, service client, renderer and secondary task together.

import { SessionApi, ConflictError } from "./api.js";
import { initialView, reduce, ViewState } from "./store.js";
import { Dom, renderView } from "./render.js";
import { SecondaryTask } from "./task.js";
import type { ResponseKind, SessionEvent } from "./types.js";

const api = new SessionApi("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const dom: Dom = {
    canvas: el<HTMLCanvasElement>("road"),
    banner: el("banner"),
    overlay: el("overlay"),
    status: el("status"),
    countdown: el("countdown"),
    toast: el("toast"),
    buttons: {
      ack: el<HTMLButtonElement>("btn-ack"),
      takeover: el<HTMLButtonElement>("btn-takeover"),
      handback: el<HTMLButtonElement>("btn-handback"),
    },
  };
  const task = new SecondaryTask(el("task"));
  task.mount();

  let view: ViewState = initialView();
  const rerender = () => {
    renderView(view, dom);
    task.setPaused(view.banner !== null || view.machine === "DONE");
  };

  const scenarioText = await fetch("./scenario.json")
    .then((r) => (r.ok ? r.json() : null))
    .catch(() => null);
  const scenario = scenarioText ?? defaultScenario();
  const mode = new URLSearchParams(location.search).get("mode") === "stepped"
    ? "stepped" : "realtime";
  const created = await api.createSession(scenario, mode);
  const sessionId = created.id;

  const apply = (ev: SessionEvent) => {
    view = reduce(view, ev);
    rerender();
  };
  api.subscribe(sessionId, -1, apply, (status) => {
    el("connection").textContent =
      status === "open" ? "" : "connection degraded, replaying on reconnect";
  });

  const post = async (kind: ResponseKind) => {
    if (view.pendingAction) return;   // debounce: one response per press
    view = { ...view, pendingAction: true, rejection: null };
    rerender();
    try {
      await api.postResponse(sessionId, kind, { secondary_task: task.stats });
    } catch (err) {
      view = {
        ...view,
        pendingAction: false,
        rejection: err instanceof ConflictError
          ? `Not possible now (${err.state})` : String(err),
      };
      rerender();
    }
  };
  dom.buttons.ack.addEventListener("click", () => void post("ack"));
  dom.buttons.takeover.addEventListener("click", () => void post("takeover"));
  dom.buttons.handback.addEventListener("click", () => void post("handback"));

  if (mode === "stepped") {
    const stepButton = el<HTMLButtonElement>("btn-step");
    stepButton.hidden = false;
    stepButton.addEventListener("click", () => void api.step(sessionId, 1));
  }
  rerender();
}

function defaultScenario(): unknown {
  return {
    name: "browser_demo",
    cruise_speed: 30.0,
    horizon: 30,
    seed: 21,
    dt: 1.0,
    initial: { position: 0.0, lane: 0, speed: 30.0 },
    driver: { vigilance: 0.9, load: 2, secondary_task: true, condition: "HARD" },
    segments: [
      { length: 750.0, lanes: 2, speed_limit: 33.0, tags: [], obstacles: [] },
      { length: 800.0, lanes: 2, speed_limit: 33.0,
        tags: ["TUNNEL", "SENSOR_DEAD_ZONE"], obstacles: [] },
      { length: 500.0, lanes: 2, speed_limit: 33.0, tags: [], obstacles: [] },
    ],
  };
}

void boot();
