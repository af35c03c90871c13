import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import {
  SCORE_GRID_STATES,
  buildRequest,
  chooseLayout,
  initialState,
  submitWhatIf,
} from "../src/state";
import type { WhatIfResponse } from "../src/types";

function readyState() {
  return {
    ...initialState(),
    player: "P1",
    recordIndex: 12,
    noiseSeed: 3,
  };
}

function fakeApi(responder?: (path: string, body: unknown) => unknown) {
  const fetchImpl = async (url: string, init?: RequestInit) => {
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    const payload = responder
      ? responder(url, body)
      : makeResponse(body);
    return new Response(JSON.stringify(payload), { status: 200 });
  };
  return new ApiClient("", fetchImpl);
}

function makeResponse(body: { player: string }): WhatIfResponse {
  return {
    player: body.player,
    results: [],
    frame: { length_m: 23.77, width_m: 10.97, margin_m: 2, image_size: 64 },
  };
}

describe("buildRequest", () => {
  it("opponent-only override carries exactly that axis", () => {
    const req = buildRequest({ ...readyState(), opponents: ["O2"] });
    expect(req.overrides).toEqual({ opponents: ["O2"] });
    expect(req.no_overrides).toBeUndefined();
    expect(req.player).toBe("P1");
    expect(req.record_index).toBe(12);
  });

  it("no active overrides must be explicit", () => {
    const req = buildRequest(readyState());
    expect(req.no_overrides).toBe(true);
    expect(req.overrides).toEqual({});
  });

  it("requires a base context", () => {
    expect(() => buildRequest(initialState())).toThrow();
  });
});

describe("layout choice", () => {
  it("score sweeps use the grid, opponent sweeps the overlay", () => {
    const gridReq = buildRequest({ ...readyState(), scores: [...SCORE_GRID_STATES] });
    expect(chooseLayout(gridReq)).toBe("grid");
    const overlayReq = buildRequest({ ...readyState(), opponents: ["O1", "O2"] });
    expect(chooseLayout(overlayReq)).toBe("overlay");
  });
});

describe("submitWhatIf", () => {
  it("appends history in order, one entry per query", async () => {
    const api = fakeApi();
    let state = { ...readyState(), opponents: ["O1"] };
    state = await submitWhatIf(state, api);
    state = { ...state, opponents: ["O2"] };
    state = await submitWhatIf(state, api);
    state = { ...state, opponents: [], scores: ["00-00", "15-00"] };
    state = await submitWhatIf(state, api);
    expect(state.history).toHaveLength(3);
    expect(state.history[0].query.overrides.opponents).toEqual(["O1"]);
    expect(state.history[2].layout).toBe("grid");
  });

  it("identical queries produce identical rendered results", async () => {
    const api = fakeApi((_, body) => ({
      player: (body as { player: string }).player,
      results: [{ overrides: { opponent: "O1" },
                  predictions: [{ landing_m: [4, 3], landing_confidence: 1,
                                  shot_type_probs: { winner: 0.1, error: 0.1, return: 0.8 },
                                  noise_seed: 3, no_landing: false,
                                  response_png_base64: "" }] }],
      frame: { length_m: 23.77, width_m: 10.97, margin_m: 2, image_size: 64 },
    }));
    let state = { ...readyState(), opponents: ["O1"] };
    state = await submitWhatIf(state, api);
    state = await submitWhatIf(state, api);
    expect(state.history).toHaveLength(2);
    expect(JSON.stringify(state.history[0].response))
      .toBe(JSON.stringify(state.history[1].response));
  });

  it("network failure preserves the session and surfaces the error", async () => {
    const api = new ApiClient("", async () => new Response("boom", { status: 500 }));
    let state = { ...readyState(), opponents: ["O1"] };
    const before = state.history.length;
    state = await submitWhatIf(state, api);
    expect(state.lastError).toContain("500");
    expect(state.history).toHaveLength(before);
    expect(state.player).toBe("P1");
  });
});
