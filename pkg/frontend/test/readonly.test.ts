import { describe, expect, it } from "vitest";

import { ApiClient, READ_ONLY_ENDPOINTS } from "../src/api";
import { SCORE_GRID_STATES, initialState, submitWhatIf } from "../src/state";

function recordingApi() {
  const fetchImpl = async (url: string, init?: RequestInit) => {
    const payload = url.includes("/whatif")
      ? { player: "P1", results: [],
          frame: { length_m: 23.77, width_m: 10.97, margin_m: 2, image_size: 64 } }
      : url.includes("/players")
        ? [{ id: "P1", shots: 3, memory_len: 3 }]
        : url.includes("/opponents")
          ? { ids: ["O1", "O2"] }
          : url.includes("/records")
            ? []
            : { length_m: 23.77, width_m: 10.97, margin_m: 2, image_size: 64 };
    return new Response(JSON.stringify(payload), { status: 200 });
  };
  return new ApiClient("", fetchImpl);
}

describe("read-only guarantee", () => {
  it("a full explorer session only touches read-only endpoints", async () => {
    const api = recordingApi();
    await api.fetchFrame();
    await api.fetchPlayers();
    await api.fetchOpponents();
    await api.fetchRecords("P1");
    let state = { ...initialState(), player: "P1", recordIndex: 0 };
    state = { ...state, opponents: ["O1", "O2"] };
    state = await submitWhatIf(state, api);
    state = { ...state, opponents: [], scores: [...SCORE_GRID_STATES] };
    state = await submitWhatIf(state, api);

    expect(api.requestLog.length).toBeGreaterThan(0);
    for (const req of api.requestLog) {
      expect(READ_ONLY_ENDPOINTS).toContain(req.path);
      // the one mutating-capable verb only ever goes to query-mode endpoints
      if (req.method !== "GET") {
        expect(["/v1/whatif", "/v1/predict"]).toContain(req.path);
      }
    }
    const forbidden = ["/v1/replay-preview", "/v1/reload"];
    for (const req of api.requestLog) {
      expect(forbidden).not.toContain(req.path);
    }
  });
});
