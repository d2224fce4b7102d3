/** Thin typed client for the /v1 HTTP API.
 *
 * The session object carries the server URL and token; the token is only
 * ever written into the Authorization header, never into rendered output.
 */

import type {
  Design,
  PredictResponse,
  ProblemDoc,
  RunConfigDoc,
  StatusResponse,
  SuggestionsResponse,
} from "./types.js";

export const MIN_POLL_INTERVAL_MS = 1000;

export interface UiSession {
  serverUrl: string;
  token: string;
  activeExperiment: string | null;
  pollIntervalMs: number;
}

export function makeSession(
  serverUrl: string,
  token: string,
  pollIntervalMs = 2000,
): UiSession {
  return {
    serverUrl: serverUrl.replace(/\/+$/, ""),
    token,
    activeExperiment: null,
    // real-time enough for experiments lasting minutes to days
    pollIntervalMs: Math.max(MIN_POLL_INTERVAL_MS, pollIntervalMs),
  };
}

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private session: UiSession,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    idempotencyKey?: string,
  ): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.session.token}`,
    };
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (idempotencyKey) headers["Idempotency-Key"] = idempotencyKey;
    const response = await this.fetchImpl(this.session.serverUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const code = payload?.error ?? "http_error";
      const detail = payload?.detail ?? `HTTP ${response.status}`;
      throw new ApiRequestError(response.status, code, String(detail));
    }
    return payload as T;
  }

  listExperiments(): Promise<{ experiments: string[] }> {
    return this.request("GET", "/v1/experiments");
  }

  createExperiment(
    name: string,
    problem: ProblemDoc,
    runConfig: RunConfigDoc,
  ): Promise<{ experiment_id: string }> {
    return this.request(
      "POST",
      "/v1/experiments",
      { name, problem, run_config: runConfig },
      `create-${name}`,
    );
  }

  status(experimentId: string): Promise<StatusResponse> {
    return this.request("GET", `/v1/experiments/${experimentId}/status`);
  }

  suggestions(experimentId: string): Promise<SuggestionsResponse> {
    return this.request("GET", `/v1/experiments/${experimentId}/suggestions`);
  }

  startRun(
    experimentId: string,
    evaluator: string | null,
    runConfig?: RunConfigDoc,
  ): Promise<{ started: boolean }> {
    return this.request("POST", `/v1/experiments/${experimentId}/runs`, {
      evaluator,
      run_config: runConfig ?? {},
    });
  }

  stopRun(experimentId: string): Promise<{ stopped: boolean }> {
    return this.request("DELETE", `/v1/experiments/${experimentId}/runs`);
  }

  claimNext(
    experimentId: string,
    worker: string,
  ): Promise<{ status: string; record: import("./types.js").RecordJson | null }> {
    return this.request("POST", `/v1/experiments/${experimentId}/claim`, {
      worker,
    });
  }

  submitResult(
    experimentId: string,
    recordId: number,
    objectives: number[],
    note = "",
  ): Promise<{ record: import("./types.js").RecordJson }> {
    return this.request(
      "POST",
      `/v1/records/${recordId}/result`,
      { experiment_id: experimentId, objectives, note },
      `result-${experimentId}-${recordId}`,
    );
  }

  submitFailure(
    experimentId: string,
    recordId: number,
    reason: string,
  ): Promise<{ record: import("./types.js").RecordJson }> {
    return this.request("POST", `/v1/records/${recordId}/result`, {
      experiment_id: experimentId,
      failure: reason,
    });
  }

  predict(experimentId: string, design: Design): Promise<PredictResponse> {
    return this.request("POST", `/v1/experiments/${experimentId}/predict`, {
      design,
    });
  }

  exportUrl(experimentId: string): string {
    return `${this.session.serverUrl}/v1/experiments/${experimentId}/export`;
  }
}
