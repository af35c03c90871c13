import { describe, expect, it } from "vitest";

import { hoverInfo, overrideLabel, renderGrid, renderOverlay } from "../src/draw";
import type { FrameMeta, PredictionJson, RecordGeometry, WhatIfResult } from "../src/types";

const frame: FrameMeta = { length_m: 23.77, width_m: 10.97, margin_m: 2, image_size: 64 };
const rect = { x: 0, y: 0, w: 800, h: 420 };

const base: RecordGeometry = {
  ball: [[2, 2], [12, 4], [21, 6]],
  hitter_feet: [[1, 8], [2, 8.5]],
  receiver_feet: [[22, 3], [22.5, 3.5]],
  reception: [21, 6],
};

function prediction(x: number, y: number): PredictionJson {
  return {
    landing_m: [x, y],
    landing_confidence: 0.8,
    shot_type_probs: { winner: 0.1, error: 0.2, return: 0.7 },
    noise_seed: 1,
    no_landing: false,
    response_png_base64: "",
  };
}

function result(opponent: string, x: number, y: number): WhatIfResult {
  return { overrides: { opponent }, predictions: [prediction(x, y)] };
}

describe("renderOverlay", () => {
  it("draws one return polyline and landing disc per result, with legends", () => {
    const results = [result("O1", 4, 3), result("O2", 4, 8), result("O3", 6, 5)];
    const scene = renderOverlay(frame, rect, base, results);
    const discs = scene.ops.filter(
      (op) => op.kind === "circle" && op.fill && op.r === 5);
    expect(discs).toHaveLength(3);
    expect(scene.legend.map((l) => l.label)).toEqual(["vs O1", "vs O2", "vs O3"]);
    const colors = new Set(scene.legend.map((l) => l.color));
    expect(colors.size).toBe(3);          // provenance distinguishable
    expect(scene.errors).toHaveLength(0);
  });

  it("single result renders one return in the first return color", () => {
    const scene = renderOverlay(frame, rect, base, [result("O1", 4, 3)]);
    const returns = scene.ops.filter(
      (op) => op.kind === "polyline" && op.color === scene.legend[0].color);
    expect(returns).toHaveLength(1);
    expect(scene.legend).toHaveLength(1);
  });

  it("malformed results get an error badge without sinking the view", () => {
    const bad: WhatIfResult = {
      overrides: { opponent: "OX" },
      predictions: [{ ...prediction(0, 0), landing_m: [NaN, 2] as [number, number] }],
    };
    const scene = renderOverlay(frame, rect, base, [result("O1", 4, 3), bad]);
    expect(scene.errors).toHaveLength(1);
    expect(scene.legend).toHaveLength(1);
    expect(scene.ops.some((op) => op.kind === "badge")).toBe(true);
  });

  it("incoming trajectory is drawn in the incoming color with markers", () => {
    const scene = renderOverlay(frame, rect, base, [result("O1", 4, 3)]);
    expect(scene.ops.some((op) => op.kind === "star")).toBe(true);
    expect(scene.ops.some(
      (op) => op.kind === "polyline" && op.color === "#e4493b")).toBe(true);
  });
});

describe("renderGrid", () => {
  const states = ["00-00", "15-00", "00-15", "30-00", "30-15", "15-30"];
  const results = states.map((score) => ({
    overrides: { score },
    predictions: [prediction(4, 5)],
  }));

  it("renders the six score states as six labelled panels", () => {
    const scene = renderGrid(frame, rect, base, results);
    const labels = scene.ops.filter((op) => op.kind === "text");
    expect(labels.map((op) => (op as { text: string }).text))
      .toEqual(states.map((s) => `P:${s}`));
    const discs = scene.ops.filter((op) => op.kind === "circle" && op.fill && op.r === 5);
    expect(discs).toHaveLength(6);
  });

  it("panels do not overlap", () => {
    const scene = renderGrid(frame, rect, base, results);
    const discs = scene.ops
      .filter((op): op is Extract<typeof op, { kind: "circle" }> =>
        op.kind === "circle" && op.fill && op.r === 5)
      .map((op) => op.at);
    const unique = new Set(discs.map(([x, y]) => `${Math.round(x)}:${Math.round(y)}`));
    expect(unique.size).toBe(6);          // same landing, six distinct panels
  });
});

describe("hoverInfo", () => {
  it("reveals landing coordinates and type probabilities near a disc", () => {
    const results = [result("O1", 4, 3)];
    const scene = renderOverlay(frame, rect, base, results);
    const disc = scene.ops.find((op) => op.kind === "circle" && op.fill && op.r === 5);
    const at = (disc as { at: [number, number] }).at;
    const info = hoverInfo(frame, rect, base, results, at[0], at[1]);
    expect(info).toContain("4.00");
    expect(info).toContain("vs O1");
    expect(info).toContain("R 0.70");
  });

  it("returns null away from any landing", () => {
    expect(hoverInfo(frame, rect, base, [result("O1", 4, 3)], 1, 1)).toBeNull();
  });
});

describe("overrideLabel", () => {
  it("labels combinations compactly", () => {
    expect(overrideLabel({})).toBe("base");
    expect(overrideLabel({ opponent: "O2", score: "30-15" })).toBe("vs O2 P:30-15");
  });
});
