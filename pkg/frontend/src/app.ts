// Browser wiring: DOM controls, canvas painting, one in-flight query at a time.

import { ApiClient } from "./api";
import { DrawOp, Scene, hoverInfo, renderGrid, renderOverlay } from "./draw";
import {
  ExplorerState,
  SCORE_GRID_STATES,
  buildRequest,
  initialState,
  submitWhatIf,
} from "./state";
import type { FrameMeta } from "./types";

const CANVAS_W = 860;
const CANVAS_H = 460;

function paint(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  ctx.fillStyle = "#10241a";
  ctx.fillRect(0, 0, CANVAS_W, CANVAS_H);
  for (const op of ops) {
    switch (op.kind) {
      case "polyline": {
        ctx.strokeStyle = op.color;
        ctx.lineWidth = op.width;
        ctx.setLineDash(op.dash ?? []);
        ctx.beginPath();
        op.points.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
        ctx.stroke();
        ctx.setLineDash([]);
        break;
      }
      case "circle": {
        ctx.beginPath();
        ctx.arc(op.at[0], op.at[1], op.r, 0, Math.PI * 2);
        if (op.fill) {
          ctx.fillStyle = op.color;
          ctx.fill();
        } else {
          ctx.strokeStyle = op.color;
          ctx.stroke();
        }
        break;
      }
      case "star": {
        ctx.fillStyle = op.color;
        ctx.beginPath();
        for (let i = 0; i < 10; i++) {
          const r = i % 2 === 0 ? op.r : op.r * 0.42;
          const ang = -Math.PI / 2 + (i * Math.PI) / 5;
          const x = op.at[0] + r * Math.cos(ang);
          const y = op.at[1] + r * Math.sin(ang);
          if (i === 0) ctx.moveTo(x, y);
          else ctx.lineTo(x, y);
        }
        ctx.closePath();
        ctx.fill();
        break;
      }
      case "text": {
        ctx.fillStyle = op.color;
        ctx.font = `${op.size}px sans-serif`;
        ctx.fillText(op.text, op.at[0], op.at[1]);
        break;
      }
      case "badge": {
        ctx.fillStyle = "#e4493b";
        ctx.font = "11px sans-serif";
        ctx.fillText(op.text, op.at[0], op.at[1]);
        break;
      }
    }
  }
}

function renderLegend(el: HTMLElement, scene: Scene): void {
  el.innerHTML = "";
  for (const entry of scene.legend) {
    const row = document.createElement("div");
    row.className = "legend-row";
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = entry.color;
    row.append(swatch, document.createTextNode(entry.label));
    el.append(row);
  }
  for (const err of scene.errors) {
    const row = document.createElement("div");
    row.className = "legend-error";
    row.textContent = err;
    el.append(row);
  }
}

export async function boot(): Promise<void> {
  const api = new ApiClient("");
  let state: ExplorerState = initialState();
  let frame: FrameMeta = await api.fetchFrame();

  const canvas = document.getElementById("court") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const playerSel = document.getElementById("player") as HTMLSelectElement;
  const recordSel = document.getElementById("record") as HTMLSelectElement;
  const opponentsBox = document.getElementById("opponents") as HTMLElement;
  const scoreGridBtn = document.getElementById("score-grid") as HTMLButtonElement;
  const submitBtn = document.getElementById("submit") as HTMLButtonElement;
  const legendEl = document.getElementById("legend") as HTMLElement;
  const hoverEl = document.getElementById("hover") as HTMLElement;
  const historyEl = document.getElementById("history") as HTMLElement;

  const players = await api.fetchPlayers();
  for (const p of players) {
    const opt = document.createElement("option");
    opt.value = p.id;
    opt.textContent = `${p.id} (${p.shots} shots)`;
    playerSel.append(opt);
  }
  const opponents = (await api.fetchOpponents()).ids;
  for (const id of opponents) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = id;
    box.addEventListener("change", () => {
      state = {
        ...state,
        opponents: Array.from(opponentsBox.querySelectorAll("input:checked"))
          .map((el) => (el as HTMLInputElement).value),
      };
    });
    label.append(box, document.createTextNode(id));
    opponentsBox.append(label);
  }

  async function selectPlayer(id: string): Promise<void> {
    state = { ...state, player: id, recordIndex: null, baseGeometry: null };
    const recs = await api.fetchRecords(id);
    recordSel.innerHTML = "";
    for (const r of recs) {
      const opt = document.createElement("option");
      opt.value = String(r.index);
      opt.textContent = `#${r.index} ts=${r.ts} vs ${r.hitter} (${r.score})`;
      recordSel.append(opt);
    }
    if (recs.length) await selectRecord(recs[recs.length - 1].index);
  }

  async function selectRecord(index: number): Promise<void> {
    const geometry = await api.fetchRecordGeometry(index);
    state = { ...state, recordIndex: index, baseGeometry: geometry };
    repaintLatest();
  }

  function repaintLatest(): void {
    const rect = { x: 10, y: 10, w: CANVAS_W - 20, h: CANVAS_H - 20 };
    const latest = state.history[state.history.length - 1];
    if (!latest || !state.baseGeometry) {
      paint(ctx, []);
      return;
    }
    const scene = latest.layout === "grid"
      ? renderGrid(frame, rect, state.baseGeometry, latest.response.results)
      : renderOverlay(frame, rect, state.baseGeometry, latest.response.results);
    paint(ctx, scene.ops);
    renderLegend(legendEl, scene);
    historyEl.textContent = state.history
      .map((h, i) => `${i + 1}. ${h.query.overrides.opponents?.join("/") ?? ""}`
        + `${h.query.overrides.scores ? " scores:" + h.query.overrides.scores.length : ""}`)
      .join("\n");
  }

  playerSel.addEventListener("change", () => void selectPlayer(playerSel.value));
  recordSel.addEventListener("change", () => void selectRecord(Number(recordSel.value)));

  scoreGridBtn.addEventListener("click", () => {
    state = { ...state, scores: [...SCORE_GRID_STATES], opponents: [] };
    void runQuery();
  });

  submitBtn.addEventListener("click", () => void runQuery());

  async function runQuery(): Promise<void> {
    if (state.pending) return;        // one in-flight query at a time
    try {
      buildRequest(state);
    } catch (err) {
      hoverEl.textContent = String(err);
      return;
    }
    state = await submitWhatIf(state, api);
    if (state.lastError) hoverEl.textContent = state.lastError;
    state = { ...state, scores: [] };
    repaintLatest();
  }

  canvas.addEventListener("mousemove", (ev) => {
    const latest = state.history[state.history.length - 1];
    if (!latest || !state.baseGeometry) return;
    const rect = { x: 10, y: 10, w: CANVAS_W - 20, h: CANVAS_H - 20 };
    const info = hoverInfo(frame, rect, state.baseGeometry,
                           latest.response.results, ev.offsetX, ev.offsetY);
    hoverEl.textContent = info ?? "";
  });

  if (players.length) {
    playerSel.value = players[0].id;
    await selectPlayer(players[0].id);
  }
}

if (typeof document !== "undefined" && document.getElementById("court")) {
  void boot();
}
