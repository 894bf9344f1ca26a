// Schematic top-down lane strip plus message banner and status chips.
// Pure presentation: reads ViewState, touches nothing else.

import type { ViewState } from "./store.js";
import type { ScenarioEcho } from "./types.js";

const TAG_COLORS: Record<string, string> = {
  FOG: "rgba(170, 180, 190, 0.55)",
  TUNNEL: "rgba(60, 60, 80, 0.55)",
  CONSTRUCTION: "rgba(235, 140, 0, 0.45)",
  ICE: "rgba(130, 200, 255, 0.45)",
  SENSOR_DEAD_ZONE: "rgba(160, 60, 180, 0.35)",
};

const VIEW_SPAN_M = 700;   // meters of road shown
const EGO_FRACTION = 0.25; // ego sits a quarter in from the left edge

export interface Dom {
  canvas: HTMLCanvasElement;
  banner: HTMLElement;
  overlay: HTMLElement;
  status: HTMLElement;
  countdown: HTMLElement;
  toast: HTMLElement;
  buttons: { ack: HTMLButtonElement; takeover: HTMLButtonElement;
             handback: HTMLButtonElement };
}

export function renderView(view: ViewState, dom: Dom): void {
  drawRoad(view, dom.canvas);
  renderBanner(view, dom);
  renderStatus(view, dom);
  renderButtons(view, dom);
}

function drawRoad(view: ViewState, canvas: HTMLCanvasElement): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !view.scenario) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const scenario = view.scenario;
  const maxLanes = Math.max(...scenario.segments.map((s) => s.lanes));
  const laneHeight = Math.min(46, (height - 30) / maxLanes);
  const origin = view.position - VIEW_SPAN_M * EGO_FRACTION;
  const xOf = (m: number) => ((m - origin) / VIEW_SPAN_M) * width;
  const yOf = (lane: number) => 15 + lane * laneHeight;

  // asphalt per segment, tinted by tags, lane count honored
  let cursor = 0;
  for (const seg of scenario.segments) {
    const x0 = Math.max(0, xOf(cursor));
    const x1 = Math.min(width, xOf(cursor + seg.length));
    if (x1 > 0 && x0 < width) {
      ctx.fillStyle = "#3c3c44";
      ctx.fillRect(x0, yOf(0), x1 - x0, seg.lanes * laneHeight);
      for (const tag of seg.tags) {
        ctx.fillStyle = TAG_COLORS[tag] ?? "rgba(255,0,0,0.3)";
        ctx.fillRect(x0, yOf(0), x1 - x0, seg.lanes * laneHeight);
      }
      ctx.strokeStyle = "#d8d8d8";
      ctx.setLineDash([14, 12]);
      for (let lane = 1; lane < seg.lanes; lane++) {
        ctx.beginPath();
        ctx.moveTo(x0, yOf(lane));
        ctx.lineTo(x1, yOf(lane));
        ctx.stroke();
      }
      ctx.setLineDash([]);
      // obstacles: red blocks in their lane
      for (const ob of seg.obstacles) {
        const ox = xOf(cursor + ob.at);
        if (ox >= -8 && ox <= width + 8) {
          ctx.fillStyle = "#e03535";
          ctx.fillRect(ox - 5, yOf(ob.lane) + laneHeight * 0.2, 10,
                       laneHeight * 0.6);
        }
      }
    }
    cursor += seg.length;
  }
  // route end marker
  const endX = xOf(cursor);
  if (endX <= width) {
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(endX, yOf(0) - 6, 3, maxLanes * laneHeight + 12);
  }
  // ego vehicle
  ctx.fillStyle = view.machine === "HUMAN_CONTROL" ? "#34c06a" : "#3a7bd5";
  const ex = xOf(view.position);
  ctx.fillRect(ex - 11, yOf(view.lane) + laneHeight * 0.15, 22,
               laneHeight * 0.7);
  ctx.fillStyle = "#fff";
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(`${view.speed.toFixed(1)} m/s`, ex - 14,
               yOf(view.lane) + laneHeight + 14);
}

function renderBanner(view: ViewState, dom: Dom): void {
  const banner = dom.banner;
  if (view.banner) {
    banner.textContent = view.banner.text;
    banner.className = `banner modality-${view.banner.modality.toLowerCase()}`;
    banner.hidden = false;
    if (view.banner.modality.includes("TACTILE") && navigator.vibrate) {
      navigator.vibrate([120, 60, 120]);
    }
  } else {
    banner.hidden = true;
    banner.textContent = "";
    banner.className = "banner";
  }
  dom.overlay.hidden = view.overlay === null;
  dom.overlay.textContent = view.overlay ?? "";
  dom.toast.hidden = view.rejection === null;
  dom.toast.textContent = view.rejection ?? "";
}

function renderStatus(view: ViewState, dom: Dom): void {
  const level = view.criticality ? ` · ${view.criticality.level}` : "";
  dom.status.textContent =
    `${view.machine}${level} · t=${view.t.toFixed(0)}s · ` +
    `${view.position.toFixed(0)} m`;
  const chips: string[] = [];
  if (view.ackDeadline !== null) {
    chips.push(`respond in ${Math.max(0, view.ackDeadline - view.t).toFixed(0)}s`);
  }
  if (view.criticalAt !== null) {
    chips.push(`critical in ${Math.max(0, view.criticalAt - view.t).toFixed(0)}s`);
  }
  dom.countdown.textContent = chips.join(" · ");
}

function renderButtons(view: ViewState, dom: Dom): void {
  const alertActive = view.machine === "AWAITING_ACK" ||
    view.machine === "ESCALATED";
  const preCritical = alertActive || view.machine === "AUTONOMOUS" ||
    view.machine === "PLAN_ADAPTED";
  dom.buttons.ack.disabled = view.pendingAction || !alertActive;
  dom.buttons.takeover.disabled = view.pendingAction || !preCritical;
  dom.buttons.handback.disabled =
    view.pendingAction || view.machine !== "HUMAN_CONTROL";
}

export function scenarioLengthMeters(scenario: ScenarioEcho): number {
  return scenario.segments.reduce((acc, s) => acc + s.length, 0);
}
