// Declarative rendering: scene builders emit draw operations that a thin
// canvas executor paints.  Keeping the scene as data makes the layouts
// testable without a DOM.

import { CourtGeometry, panelGrid, Rect } from "./geometry";
import type { FrameMeta, RecordGeometry, WhatIfResult } from "./types";

export type DrawOp =
  | { kind: "polyline"; points: [number, number][]; color: string; width: number; dash?: number[] }
  | { kind: "circle"; at: [number, number]; r: number; color: string; fill: boolean }
  | { kind: "star"; at: [number, number]; r: number; color: string }
  | { kind: "text"; at: [number, number]; text: string; color: string; size: number }
  | { kind: "badge"; at: [number, number]; text: string };

export interface LegendEntry {
  label: string;
  color: string;
}

export interface Scene {
  ops: DrawOp[];
  legend: LegendEntry[];
  errors: string[];
}

export const INCOMING_COLOR = "#e4493b";      // incoming ball
export const OPPONENT_COLOR = "#3b6de4";      // opponent feet
export const RECEIVER_COLOR = "#d13be4";      // receiver feet
export const MARKER_COLOR = "#e4c63b";        // start/end markers
export const RETURN_COLORS = [
  "#e4c63b", "#3be49c", "#e4783b", "#3bd7e4", "#b0e43b", "#e43bb4",
  "#8c3be4", "#97a81f",
];

export function overrideLabel(ov: WhatIfResult["overrides"]): string {
  const parts: string[] = [];
  if (ov.opponent !== undefined) parts.push(`vs ${ov.opponent}`);
  if (ov.score !== undefined) parts.push(`P:${ov.score}`);
  if (ov.speed_bin !== undefined) parts.push(`speed#${ov.speed_bin}`);
  if (ov.angle_bin !== undefined) parts.push(`angle#${ov.angle_bin}`);
  return parts.length ? parts.join(" ") : "base";
}

function courtOps(geo: CourtGeometry): DrawOp[] {
  return geo.courtLines().map((line) => ({
    kind: "polyline" as const,
    points: line.map(([x, y]) => geo.toCanvas(x, y)),
    color: "#6a7b6f",
    width: 1,
  }));
}

function baseContextOps(geo: CourtGeometry, base: RecordGeometry): DrawOp[] {
  const ops: DrawOp[] = [];
  if (base.ball.length > 1) {
    ops.push({ kind: "polyline", color: INCOMING_COLOR, width: 2,
               points: base.ball.map(([x, y]) => geo.toCanvas(x, y)) });
    ops.push({ kind: "star", at: geo.toCanvas(...base.ball[0]), r: 6, color: MARKER_COLOR });
    ops.push({ kind: "circle", at: geo.toCanvas(...base.ball[base.ball.length - 1]),
               r: 4, color: MARKER_COLOR, fill: true });
  }
  if (base.hitter_feet.length) {
    ops.push({ kind: "polyline", color: OPPONENT_COLOR, width: 2,
               points: base.hitter_feet.map(([x, y]) => geo.toCanvas(x, y)) });
  }
  if (base.receiver_feet.length) {
    ops.push({ kind: "polyline", color: RECEIVER_COLOR, width: 2,
               points: base.receiver_feet.map(([x, y]) => geo.toCanvas(x, y)) });
  }
  return ops;
}

function returnOps(geo: CourtGeometry, base: RecordGeometry, result: WhatIfResult,
                   color: string): DrawOp[] | null {
  const prediction = result.predictions[0];
  if (!prediction || !Array.isArray(prediction.landing_m)
      || prediction.landing_m.length !== 2
      || !prediction.landing_m.every(Number.isFinite)) {
    return null;
  }
  const landing = geo.toCanvas(prediction.landing_m[0], prediction.landing_m[1]);
  const from = geo.toCanvas(...base.reception);
  const ops: DrawOp[] = [
    { kind: "polyline", points: [from, landing], color, width: 2,
      dash: prediction.no_landing ? [4, 4] : undefined },
    { kind: "circle", at: landing, r: 5, color, fill: true },
  ];
  return ops;
}

/** Overlay layout: every what-if return drawn on one court with a legend. */
export function renderOverlay(frame: FrameMeta, rect: Rect, base: RecordGeometry,
                              results: WhatIfResult[]): Scene {
  const geo = new CourtGeometry(frame, rect);
  const ops = [...courtOps(geo), ...baseContextOps(geo, base)];
  const legend: LegendEntry[] = [];
  const errors: string[] = [];
  results.forEach((result, i) => {
    const color = RETURN_COLORS[i % RETURN_COLORS.length];
    const drawn = returnOps(geo, base, result, color);
    const label = overrideLabel(result.overrides);
    if (drawn === null) {
      errors.push(`result ${i} (${label}): malformed prediction`);
      ops.push({ kind: "badge", at: [rect.x + 8, rect.y + 14 * (errors.length)],
                 text: `! ${label}` });
      return;
    }
    ops.push(...drawn);
    legend.push({ label, color });
  });
  return { ops, legend, errors };
}

/** Small-multiple layout: one panel per result (score sweeps). */
export function renderGrid(frame: FrameMeta, rect: Rect, base: RecordGeometry,
                           results: WhatIfResult[], columns = 3): Scene {
  const panels = panelGrid(frame, rect, results.length, columns);
  const ops: DrawOp[] = [];
  const legend: LegendEntry[] = [];
  const errors: string[] = [];
  results.forEach((result, i) => {
    const geo = panels[i];
    ops.push(...courtOps(geo), ...baseContextOps(geo, base));
    const label = overrideLabel(result.overrides);
    ops.push({ kind: "text", at: [geo.rect.x + 4, geo.rect.y + 12], text: label,
               color: "#e8e8e8", size: 11 });
    const color = RETURN_COLORS[0];
    const drawn = returnOps(geo, base, result, color);
    if (drawn === null) {
      errors.push(`panel ${i} (${label}): malformed prediction`);
      ops.push({ kind: "badge", at: [geo.rect.x + 4, geo.rect.y + 26], text: "!" });
      return;
    }
    ops.push(...drawn);
    legend.push({ label, color });
  });
  return { ops, legend, errors };
}

/** Hover readout for a prediction near a canvas point, if any. */
export function hoverInfo(frame: FrameMeta, rect: Rect, base: RecordGeometry,
                          results: WhatIfResult[], px: number, py: number,
                          radius = 10): string | null {
  const geo = new CourtGeometry(frame, rect);
  for (const result of results) {
    const p = result.predictions[0];
    if (!p) continue;
    const [cx, cy] = geo.toCanvas(p.landing_m[0], p.landing_m[1]);
    if (Math.hypot(cx - px, cy - py) <= radius) {
      const probs = p.shot_type_probs;
      return `${overrideLabel(result.overrides)}: (${p.landing_m[0].toFixed(2)}, `
        + `${p.landing_m[1].toFixed(2)}) m | W ${probs.winner.toFixed(2)} `
        + `E ${probs.error.toFixed(2)} R ${probs.return.toFixed(2)}`;
    }
  }
  return null;
}
