/** Typed client for the gateway.
 *
 * Every response is an envelope with exactly one of payload/error; a
 * non-null error (or a transport failure) becomes an ApiError so
 * callers deal with one failure shape.  The fetch implementation is
 * injectable for tests.
 */

import type {
  ComponentDetails,
  ComponentForm,
  ComponentSetForm,
  Envelope,
  FaultContextDetails,
  FaultContextForm,
  HealthPayload,
  HeatmapPayload,
  ModelInfo,
  Report,
  SessionPayload,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
  }
}

export class GatewayClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // default binding keeps window.fetch's `this` intact in browsers
    this.fetchImpl =
      fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/api/v1${path}`, {
        method,
        headers: body === undefined
          ? undefined
          : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new ApiError("unreachable", `gateway unreachable: ${cause}`, 0);
    }
    let envelope: Envelope<T>;
    try {
      envelope = (await response.json()) as Envelope<T>;
    } catch {
      throw new ApiError(
        "bad-envelope",
        `non-JSON response (HTTP ${response.status})`,
        response.status,
      );
    }
    if (envelope.error !== null) {
      throw new ApiError(
        envelope.error.code,
        envelope.error.message,
        response.status,
      );
    }
    if (envelope.payload === null) {
      throw new ApiError("bad-envelope", "envelope carries no payload",
        response.status);
    }
    return envelope.payload;
  }

  // store -------------------------------------------------------------

  health(): Promise<HealthPayload> {
    return this.request("GET", "/health");
  }

  kgStats(): Promise<Record<string, unknown>> {
    return this.request("GET", "/kg/stats");
  }

  kgExport(): Promise<{ triples: string }> {
    return this.request("GET", "/kg/export");
  }

  // knowledge acquisition ----------------------------------------------

  addComponent(form: ComponentForm): Promise<{ id: string; name: string }> {
    return this.request("POST", "/knowledge/components", form);
  }

  getComponent(name: string): Promise<ComponentDetails> {
    return this.request(
      "GET",
      `/knowledge/components/${encodeURIComponent(name)}`,
    );
  }

  addFaultContext(
    form: FaultContextForm,
  ): Promise<{ id: string; dtc_code: string }> {
    return this.request("POST", "/knowledge/fault-contexts", form);
  }

  getFaultContext(dtc: string): Promise<FaultContextDetails> {
    return this.request(
      "GET",
      `/knowledge/fault-contexts/${encodeURIComponent(dtc)}`,
    );
  }

  addComponentSet(
    form: ComponentSetForm,
  ): Promise<{ id: string; name: string }> {
    return this.request("POST", "/knowledge/component-sets", form);
  }

  // models and heatmaps -------------------------------------------------

  listModels(): Promise<{ models: ModelInfo[] }> {
    return this.request("GET", "/models");
  }

  getHeatmap(id: string): Promise<HeatmapPayload> {
    return this.request("GET", `/heatmaps/${encodeURIComponent(id)}`);
  }

  // guided diagnosis ----------------------------------------------------

  createSession(body: {
    vin: string;
    vehicle_model?: string;
    model_id?: string | null;
  }): Promise<SessionPayload> {
    return this.request("POST", "/sessions", body);
  }

  getSession(id: string): Promise<SessionPayload> {
    return this.request("GET", `/sessions/${encodeURIComponent(id)}`);
  }

  submitDtcs(id: string, codes: string[]): Promise<SessionPayload> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(id)}/dtcs`,
      { codes },
    );
  }

  submitOscillogram(
    id: string,
    values: number[],
  ): Promise<SessionPayload> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(id)}/oscillogram`,
      { values },
    );
  }

  submitManual(id: string, anomaly: boolean): Promise<SessionPayload> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(id)}/manual`,
      { anomaly },
    );
  }

  getReport(id: string): Promise<Report> {
    return this.request(
      "GET",
      `/sessions/${encodeURIComponent(id)}/report`,
    );
  }
}
