// @vitest-environment node

/** Integration against a live gateway.
 *
 * Runs only when a gateway answers on WORKSHOP_GATEWAY_URL (default
 * http://127.0.0.1:8031); otherwise every test here is skipped.  Uses
 * unique entity names so repeated runs never collide.
 */

import { describe, expect, it } from "vitest";

import { ApiError, GatewayClient } from "../src/api.js";
import type { SessionPayload } from "../src/types.js";

const BASE = process.env.WORKSHOP_GATEWAY_URL ?? "http://127.0.0.1:8031";

const client = new GatewayClient(BASE, (url, init) =>
  fetch(url, { ...init, signal: AbortSignal.timeout(15_000) }));

async function reachable(): Promise<boolean> {
  try {
    return (await client.health()).status === "ok";
  } catch {
    return false;
  }
}

const live = await reachable();

const sfx = Date.now().toString(36) + Math.floor(Math.random() * 1e4);
const CA = `live sensor ${sfx}`;
const CB = `live harness ${sfx}`;
const CC = `live valve ${sfx}`;
const CD = `live pump ${sfx}`;
const DTC =
  String.fromCharCode(65 + Math.floor(Math.random() * 26)) +
  String(Math.floor(Math.random() * 10_000)).padStart(4, "0");

describe.skipIf(!live)("live gateway", () => {
  it("acquires knowledge and diagnoses a manual session end to end",
    async () => {
      await client.addComponent({
        name: CB, use_oscilloscope: false, affected_by: [] });
      await client.addComponent({
        name: CA, use_oscilloscope: false, affected_by: [CB] });
      await client.addComponent({
        name: CC, use_oscilloscope: false, affected_by: [] });
      await client.addComponent({
        name: CD, use_oscilloscope: false, affected_by: [CA] });
      await client.addFaultContext({
        dtc_code: DTC,
        condition_text: "live integration bench check",
        symptoms: ["bench symptom"],
        associations: [
          { component: CA, priority: 1 },
          { component: CC, priority: 2 },
          { component: CD, priority: 3 },
        ],
      });

      const details = await client.getComponent(CA);
      expect(details.affected_by).toEqual([CB]);

      let payload: SessionPayload = await client.createSession({
        vin: `LIVE${sfx}`, vehicle_model: "test bench", model_id: null });
      expect(payload.state).toBe("READ_DTCS");
      payload = await client.submitDtcs(payload.session_id, [DTC]);

      const verdicts = new Map([
        [CA, true], [CC, false], [CD, true], [CB, true]]);
      for (let step = 0; payload.awaiting === "manual"; step += 1) {
        expect(step).toBeLessThan(10);
        const component = payload.current_component!;
        expect(verdicts.has(component)).toBe(true);
        payload = await client.submitManual(
          payload.session_id, verdicts.get(component)!);
      }

      expect(payload.state).toBe("DONE");
      const report = payload.report;
      expect(report.anomalous).toEqual([CA, CD, CB]);
      expect(report.fault_paths).toHaveLength(1);
      expect(report.fault_paths[0].components).toEqual([CB, CA, CD]);
      expect(report.fault_paths[0].cycle).toBe(false);
      expect(report.sensor_hypothesis).toBe(false);

      // every artifact the report names resolves in the export
      const { triples } = await client.kgExport();
      const ids = [
        report.log_id!,
        report.fault_paths[0].id,
        ...report.results.map((r) => r.classification_id),
      ];
      for (const id of ids) {
        expect(triples).toContain(`<${id}> <a> `);
      }
    });

  it("reports documented error codes", async () => {
    const missing = client.getComponent(`missing ${sfx}`);
    await expect(missing).rejects.toMatchObject({
      code: "not-found", status: 404 });

    const fresh = await client.createSession({
      vin: `LIVE-ERR${sfx}`, vehicle_model: "test bench",
      model_id: null });
    const bad = client.submitDtcs(fresh.session_id, ["NOPE"]);
    await expect(bad).rejects.toMatchObject({
      code: "validation", status: 422 });
    const error = await bad.catch((e: unknown) => e as ApiError);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).message)
      .toMatch(/letter followed by four digits/);
  });
});

describe.skipIf(live)("live gateway (skipped)", () => {
  it(`is skipped because no gateway answered at ${BASE}`, () => {
    expect(live).toBe(false);
  });
});
