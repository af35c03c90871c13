// Thin client for the /v1 API.  Every request is recorded so tests can assert
// the explorer never touches a state-mutating endpoint.

import type {
  FrameMeta,
  PlayerInfo,
  RecordGeometry,
  RecordSummary,
  WhatIfRequestBody,
  WhatIfResponse,
} from "./types";

export interface LoggedRequest {
  method: string;
  path: string;
}

/** Endpoints the explorer is allowed to call; all are read-only server-side. */
export const READ_ONLY_ENDPOINTS = [
  "/v1/health",
  "/v1/frame",
  "/v1/players",
  "/v1/opponents",
  "/v1/records",
  "/v1/record-geometry",
  "/v1/whatif",
  "/v1/predict",
  "/v1/trace",
];

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly requestLog: LoggedRequest[] = [];
  private readonly fetchImpl: FetchLike;

  constructor(private readonly baseUrl: string = "", fetchImpl?: FetchLike) {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.requestLog.push({ method, path: path.split("?")[0] });
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`${method} ${path} failed (${resp.status}): ${detail}`);
    }
    return resp.json() as Promise<T>;
  }

  fetchFrame(): Promise<FrameMeta> {
    return this.request("GET", "/v1/frame");
  }

  fetchPlayers(): Promise<PlayerInfo[]> {
    return this.request("GET", "/v1/players");
  }

  fetchOpponents(): Promise<{ ids: string[] }> {
    return this.request("GET", "/v1/opponents");
  }

  fetchRecords(player: string, limit = 30): Promise<RecordSummary[]> {
    return this.request("GET", `/v1/records?player=${encodeURIComponent(player)}&limit=${limit}`);
  }

  fetchRecordGeometry(index: number): Promise<RecordGeometry> {
    return this.request("GET", `/v1/record-geometry?index=${index}`);
  }

  postWhatIf(body: WhatIfRequestBody): Promise<WhatIfResponse> {
    return this.request("POST", "/v1/whatif", body);
  }
}
