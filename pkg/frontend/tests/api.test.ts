import { describe, expect, it } from "vitest";

import { ApiError, GatewayClient } from "../src/api.js";
import { GatewayStub, fail, ok } from "./helpers.js";

function client(stub: GatewayStub): GatewayClient {
  return new GatewayClient("http://gw.test/", stub.fetch);
}

describe("envelope handling", () => {
  it("unwraps the payload of a successful envelope", async () => {
    const stub = new GatewayStub()
      .on("GET", "/health", () => ok({ status: "ok", revision: 7 }));
    expect(await client(stub).health())
      .toEqual({ status: "ok", revision: 7 });
  });

  it("turns an error envelope into an ApiError with code and status",
    async () => {
      const stub = new GatewayStub().on("POST", "/sessions", () =>
        fail("validation", "vin must not be empty", 422));
      const err = await client(stub)
        .createSession({ vin: "" })
        .catch((e: unknown) => e);
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).code).toBe("validation");
      expect((err as ApiError).status).toBe(422);
      expect((err as ApiError).message).toMatch(/vin/);
    });

  it("maps transport failures to the unreachable code", async () => {
    const broken = new GatewayClient("http://gw.test", () =>
      Promise.reject(new Error("ECONNREFUSED")));
    const err = await broken.health().catch((e: unknown) => e);
    expect((err as ApiError).code).toBe("unreachable");
    expect((err as ApiError).status).toBe(0);
  });

  it("flags a non-JSON response", async () => {
    const broken = new GatewayClient("http://gw.test", () =>
      Promise.resolve({
        status: 502,
        json: () => Promise.reject(new Error("not json")),
      } as unknown as Response));
    const err = await broken.health().catch((e: unknown) => e);
    expect((err as ApiError).code).toBe("bad-envelope");
    expect((err as ApiError).status).toBe(502);
  });
});

describe("request construction", () => {
  it("builds paths under /api/v1 and strips trailing slashes",
    async () => {
      const stub = new GatewayStub()
        .on("GET", "/knowledge/components/boost%20sensor", () =>
          ok({ name: "boost sensor", use_oscilloscope: false,
            affected_by: [], sets: [] }));
      await client(stub).getComponent("boost sensor");
      expect(stub.calls).toEqual([{
        method: "GET",
        path: "/knowledge/components/boost%20sensor",
        body: undefined,
      }]);
    });

  it("serializes POST bodies as JSON", async () => {
    const stub = new GatewayStub()
      .on("POST", "/sessions/s1/manual", () =>
        ok({ session_id: "s1", state: "DONE", awaiting: null,
          current_component: null, report: null }));
    await client(stub).submitManual("s1", true);
    expect(stub.calls[0].body).toEqual({ anomaly: true });
  });
});
