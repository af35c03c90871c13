// Payload shapes of the /v1 HTTP API.

export interface FrameMeta {
  length_m: number;
  width_m: number;
  margin_m: number;
  image_size: number;
}

export interface PlayerInfo {
  id: string;
  shots: number;
  memory_len: number;
}

export interface RecordSummary {
  index: number;
  receiver: string;
  hitter: string;
  ts: number;
  score: string;
  shot_type: string;
}

export interface RecordGeometry {
  ball: [number, number][];
  hitter_feet: [number, number][];
  receiver_feet: [number, number][];
  reception: [number, number];
}

export interface PredictionJson {
  landing_m: [number, number];
  landing_confidence: number;
  shot_type_probs: { winner: number; error: number; return: number };
  noise_seed: number;
  no_landing: boolean;
  response_png_base64: string;
}

export interface OverrideCombo {
  opponent?: string;
  score?: string;
  speed_bin?: number;
  angle_bin?: number;
}

export interface WhatIfResult {
  overrides: OverrideCombo;
  predictions: PredictionJson[];
}

export interface WhatIfResponse {
  player: string;
  results: WhatIfResult[];
  frame: FrameMeta;
}

export interface OverrideRequest {
  opponents?: string[];
  scores?: string[];
  speed_bins?: number[];
  angle_bins?: number[];
}

export interface WhatIfRequestBody {
  player: string;
  record_index: number;
  overrides: OverrideRequest;
  no_overrides?: boolean;
  noise_seed: number;
  samples: number;
}
