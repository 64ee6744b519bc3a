/** Shared test scaffolding: scripted gateway stub and payload builders. */

import type { FetchLike } from "../src/api.js";
import type { Report, SessionPayload } from "../src/types.js";

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
}

type Responder = (body: unknown) => {
  status?: number;
  payload?: unknown;
  error?: { code: string; message: string };
};

/** One gateway response, or a queue consumed call by call. */
export type Route = Responder | Responder[];

export function ok(payload: unknown, status = 200): ReturnType<Responder> {
  return { status, payload };
}

export function fail(
  code: string,
  message: string,
  status: number,
): ReturnType<Responder> {
  return { status, error: { code, message } };
}

export class GatewayStub {
  readonly calls: RecordedCall[] = [];
  private readonly routes = new Map<string, Route>();

  on(method: string, path: string, route: Route): this {
    this.routes.set(`${method} ${path}`, route);
    return this;
  }

  fetch: FetchLike = (url, init) => {
    const method = init?.method ?? "GET";
    const path = new URL(url).pathname.replace(/^\/api\/v1/, "");
    const body = init?.body === undefined
      ? undefined
      : JSON.parse(init.body as string);
    this.calls.push({ method, path, body });
    const route = this.routes.get(`${method} ${path}`);
    if (route === undefined) {
      throw new Error(`unexpected request: ${method} ${path}`);
    }
    const responder = Array.isArray(route)
      ? route.shift()
      : route;
    if (responder === undefined) {
      throw new Error(`route exhausted: ${method} ${path}`);
    }
    const result = responder(body);
    const envelope = result.error
      ? { payload: null, error: result.error }
      : { payload: result.payload, error: null };
    const response = {
      status: result.status ?? 200,
      json: () => Promise.resolve(envelope),
    };
    return Promise.resolve(response as unknown as Response);
  };
}

export function emptyReport(vin = "VIN1"): Report {
  return {
    vin,
    dtcs: [],
    results: [],
    anomalous: [],
    fault_paths: [],
    sensor_hypothesis: false,
    warnings: [],
    log_id: null,
  };
}

export function session(
  overrides: Partial<SessionPayload> & { state: string },
): SessionPayload {
  return {
    session_id: "s1",
    awaiting: null,
    current_component: null,
    report: emptyReport(),
    ...overrides,
  };
}

/** Let queued microtasks and immediate handlers settle. */
export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
