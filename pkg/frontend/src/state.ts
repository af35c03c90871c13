// Explorer session state: base context selection, override set, and an
// append-only history of (query, result) pairs for side-by-side comparison.

import { ApiClient } from "./api";
import type {
  OverrideRequest,
  RecordGeometry,
  WhatIfRequestBody,
  WhatIfResponse,
} from "./types";

export interface HistoryEntry {
  query: WhatIfRequestBody;
  response: WhatIfResponse;
  layout: "overlay" | "grid";
}

export interface ExplorerState {
  player: string | null;
  recordIndex: number | null;
  baseGeometry: RecordGeometry | null;
  opponents: string[];
  scores: string[];
  noiseSeed: number;
  samples: number;
  history: HistoryEntry[];
  pending: boolean;
  lastError: string | null;
}

export function initialState(): ExplorerState {
  return {
    player: null,
    recordIndex: null,
    baseGeometry: null,
    opponents: [],
    scores: [],
    noiseSeed: 7,
    samples: 1,
    history: [],
    pending: false,
    lastError: null,
  };
}

/** The request body contains exactly the active override axes, nothing else. */
export function buildRequest(state: ExplorerState): WhatIfRequestBody {
  if (state.player === null || state.recordIndex === null) {
    throw new Error("select a player and a base context first");
  }
  const overrides: OverrideRequest = {};
  if (state.opponents.length) overrides.opponents = [...state.opponents];
  if (state.scores.length) overrides.scores = [...state.scores];
  const body: WhatIfRequestBody = {
    player: state.player,
    record_index: state.recordIndex,
    overrides,
    noise_seed: state.noiseSeed,
    samples: state.samples,
  };
  if (!state.opponents.length && !state.scores.length) {
    body.no_overrides = true;
  }
  return body;
}

export function chooseLayout(query: WhatIfRequestBody): "overlay" | "grid" {
  // score sweeps read best as small multiples; opponent sweeps as an overlay
  const scores = query.overrides.scores?.length ?? 0;
  return scores > 1 ? "grid" : "overlay";
}

/** POST the active what-if query; history grows by exactly one on success. */
export async function submitWhatIf(state: ExplorerState,
                                   api: ApiClient): Promise<ExplorerState> {
  const query = buildRequest(state);
  const next = { ...state, pending: true, lastError: null };
  try {
    const response = await api.postWhatIf(query);
    return {
      ...next,
      pending: false,
      history: [...state.history,
                { query, response, layout: chooseLayout(query) }],
    };
  } catch (err) {
    // surface the failure without losing the session
    return { ...next, pending: false, lastError: String(err) };
  }
}

export const SCORE_GRID_STATES = ["00-00", "15-00", "00-15", "30-00", "30-15", "15-30"];
