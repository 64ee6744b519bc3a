import { beforeEach, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { createWizard } from "../src/wizard.js";
import type { ComponentResult, Report } from "../src/types.js";
import { GatewayStub, emptyReport, fail, flush, ok, session }
  from "./helpers.js";

const VIN = "WVWZZZ9NZAY123456";

function mount(stub: GatewayStub) {
  const root = document.createElement("div");
  document.body.replaceChildren(root);
  const wizard = createWizard(
    root, new GatewayClient("http://gw", stub.fetch));
  return { root, wizard };
}

function stateChip(root: HTMLElement): string {
  return root.querySelector(".state-chip")?.textContent ?? "(no chip)";
}

function submitForm(root: HTMLElement, selector: string): void {
  root.querySelector<HTMLFormElement>(selector)!
    .dispatchEvent(new Event("submit", { cancelable: true }));
}

const oscResult: ComponentResult = {
  component: "boost sensor",
  anomaly: true,
  method: "oscillogram",
  classification_id: "c1",
  uncertainty: 0.012,
  heatmap_id: "h1",
};

const manualResult: ComponentResult = {
  component: "wiring harness",
  anomaly: true,
  method: "manual",
  classification_id: "c2",
  uncertainty: null,
  heatmap_id: null,
};

function doneReport(): Report {
  return {
    ...emptyReport(VIN),
    dtcs: ["P2563"],
    results: [oscResult, manualResult],
    anomalous: ["boost sensor", "wiring harness"],
    fault_paths: [{
      components: ["wiring harness", "boost sensor"],
      cycle: false,
      id: "p1",
    }],
    log_id: "log1",
  };
}

describe("guided session walkthrough", () => {
  let stub: GatewayStub;
  let root: HTMLElement;

  beforeEach(() => {
    stub = new GatewayStub()
      .on("GET", "/models", () =>
        ok({ models: [{ model_id: "fcn-demo", input_length: 8 }] }))
      .on("POST", "/sessions", () =>
        ok(session({ state: "READ_DTCS", awaiting: "dtcs" }), 201))
      .on("POST", "/sessions/s1/dtcs", () => ok(session({
        state: "RECORD_OSCILLOGRAM",
        awaiting: "oscillogram",
        current_component: "boost sensor",
        report: { ...emptyReport(VIN), dtcs: ["P2563"] },
      })))
      .on("POST", "/sessions/s1/oscillogram", () => ok(session({
        state: "AWAIT_MANUAL_RESULTS",
        awaiting: "manual",
        current_component: "wiring harness",
        report: {
          ...emptyReport(VIN),
          dtcs: ["P2563"],
          results: [oscResult],
        },
      })))
      .on("POST", "/sessions/s1/manual", () => ok(session({
        state: "DONE",
        report: doneReport(),
      })))
      .on("GET", "/heatmaps/h1", () => ok({
        id: "h1",
        method: "grad-cam",
        values: [0, 0, 0.2, 1, 0.4, 0, 0, 0],
      }));
    ({ root } = mount(stub));
  });

  it("renders only server-reported states and round-trips every step",
    async () => {
      await flush();
      // classifier options came from the gateway
      const options = [...root.querySelectorAll("option")]
        .map((o) => o.textContent);
      expect(options).toEqual(
        ["manual checks only", "fcn-demo (length 8)"]);

      // start -> READ_DTCS
      root.querySelector<HTMLInputElement>("#wizard-vin")!.value = VIN;
      root.querySelector<HTMLSelectElement>("#wizard-model")!
        .value = "fcn-demo";
      submitForm(root, "form.wizard-start");
      await flush();
      expect(stateChip(root)).toBe("READ_DTCS");
      expect(stub.calls.at(-1)).toMatchObject({
        method: "POST",
        path: "/sessions",
        body: { vin: VIN, vehicle_model: "unknown",
          model_id: "fcn-demo" },
      });

      // READ_DTCS -> RECORD_OSCILLOGRAM
      root.querySelector<HTMLTextAreaElement>("#wizard-dtcs")!
        .value = "P2563";
      submitForm(root, "form.await-dtcs");
      await flush();
      expect(stateChip(root)).toBe("RECORD_OSCILLOGRAM");
      expect(root.querySelector(".instruction-card h4")!.textContent)
        .toBe("Record an oscillogram at: boost sensor");
      expect(stub.calls.at(-1)!.body).toEqual({ codes: ["P2563"] });

      // RECORD_OSCILLOGRAM -> AWAIT_MANUAL_RESULTS
      root.querySelector<HTMLTextAreaElement>("#wizard-oscillogram")!
        .value = "0, 0, 1, 3, 1, 0, 0, 0";
      submitForm(root, "form.await-oscillogram");
      await flush();
      expect(stateChip(root)).toBe("AWAIT_MANUAL_RESULTS");
      expect(root.querySelector(".instruction-card h4")!.textContent)
        .toBe("Inspect: wiring harness");
      const oscCall = stub.calls.find(
        (c) => c.path === "/sessions/s1/oscillogram")!;
      expect(oscCall.body).toEqual({ values: [0, 0, 1, 3, 1, 0, 0, 0] });

      // the classification history shows the saliency overlay on the
      // very series the user uploaded: 8 bands, one per sample
      const item = root.querySelector("li.result.anomalous")!;
      expect(item.querySelector(".component")!.textContent)
        .toBe("boost sensor");
      expect(item.querySelector(".badge")!.textContent).toBe("anomalous");
      const bands = item.querySelectorAll("svg rect[data-sample]");
      expect(bands.length).toBe(8);
      expect(bands[3].getAttribute("fill-opacity")).toBe("1.0000");
      expect(item.querySelector(".method-tag")!.textContent)
        .toBe("grad-cam");

      // AWAIT_MANUAL_RESULTS -> DONE
      root.querySelector<HTMLButtonElement>("button.verdict.anomalous")!
        .click();
      await flush();
      expect(stateChip(root)).toBe("DONE");
      expect(stub.calls.find((c) => c.path === "/sessions/s1/manual")!
        .body).toEqual({ anomaly: true });

      // report: root cause leftmost, artifacts resolvable by id
      expect(root.querySelector(".report-card h3")!.textContent)
        .toBe("Diagnosis report");
      const labels = [...root.querySelectorAll(
        "figure.fault-path text")].map((t) => t.textContent);
      expect(labels).toEqual(["wiring harness", "boost sensor"]);
      expect(root.querySelector("figure.fault-path figcaption")!
        .textContent).toContain("root cause: wiring harness");
      const artifacts = root.querySelector("details.artifacts")!
        .textContent!;
      expect(artifacts).toContain("diagnosis log: log1");
      expect(artifacts).toContain("classification boost sensor: c1");
      expect(artifacts).toContain("heatmap boost sensor: h1");
      expect(artifacts).toContain("fault path: p1");

      // no transition happened outside these calls: one POST per user
      // action, plus reads
      expect(stub.calls.map((c) => `${c.method} ${c.path}`)).toEqual([
        "GET /models",
        "POST /sessions",
        "POST /sessions/s1/dtcs",
        "POST /sessions/s1/oscillogram",
        "GET /heatmaps/h1",
        "POST /sessions/s1/manual",
        "GET /heatmaps/h1",
      ]);
    });

  it("gates an empty VIN locally", async () => {
    await flush();
    submitForm(root, "form.wizard-start");
    await flush();
    expect(root.querySelector("[data-error-for=vin]")!.textContent)
      .toMatch(/required/);
    expect(stub.calls.map((c) => c.method)).toEqual(["GET"]);
  });

  it("keeps an unparseable oscillogram on the client", async () => {
    await flush();
    root.querySelector<HTMLInputElement>("#wizard-vin")!.value = VIN;
    submitForm(root, "form.wizard-start");
    await flush();
    root.querySelector<HTMLTextAreaElement>("#wizard-dtcs")!
      .value = "P2563";
    submitForm(root, "form.await-dtcs");
    await flush();

    root.querySelector<HTMLTextAreaElement>("#wizard-oscillogram")!
      .value = "1, 2, x, 4";
    submitForm(root, "form.await-oscillogram");
    await flush();
    expect(root.querySelector("[data-error-for=oscillogram]")!
      .textContent).toMatch(/entry 3/);
    expect(stub.calls.some(
      (c) => c.path === "/sessions/s1/oscillogram")).toBe(false);
    expect(stateChip(root)).toBe("RECORD_OSCILLOGRAM");
  });
});

describe("out-of-turn submissions", () => {
  it("resyncs from the gateway instead of guessing", async () => {
    const resynced = session({
      state: "RECORD_OSCILLOGRAM",
      awaiting: "oscillogram",
      current_component: "boost sensor",
      report: { ...emptyReport(VIN), dtcs: ["P2563"] },
    });
    const stub = new GatewayStub()
      .on("GET", "/models", () => ok({ models: [] }))
      .on("POST", "/sessions", () =>
        ok(session({ state: "READ_DTCS", awaiting: "dtcs" }), 201))
      .on("POST", "/sessions/s1/dtcs", () =>
        fail("protocol",
          "session s1 expects an oscillogram, not trouble codes", 409))
      .on("GET", "/sessions/s1", () => ok(resynced));
    const { root } = mount(stub);
    await flush();
    root.querySelector<HTMLInputElement>("#wizard-vin")!.value = VIN;
    submitForm(root, "form.wizard-start");
    await flush();
    root.querySelector<HTMLTextAreaElement>("#wizard-dtcs")!
      .value = "P2563";
    submitForm(root, "form.await-dtcs");
    await flush();

    // the failed POST triggered a GET resync, and the view now shows
    // the server's actual state
    expect(stub.calls.map((c) => `${c.method} ${c.path}`)).toContain(
      "GET /sessions/s1");
    expect(stateChip(root)).toBe("RECORD_OSCILLOGRAM");
    expect(root.querySelector(".wizard-banner")!.textContent)
      .toMatch(/out of turn/);
    expect(root.querySelector(".instruction-card h4")!.textContent)
      .toBe("Record an oscillogram at: boost sensor");
  });
});

describe("report rendering", () => {
  it("shows the sensor hypothesis when nothing was anomalous",
    async () => {
      const stub = new GatewayStub()
        .on("GET", "/models", () => ok({ models: [] }))
        .on("POST", "/sessions", () => ok(session({
          state: "DONE",
          report: {
            ...emptyReport(VIN),
            dtcs: ["P2563"],
            results: [{ ...manualResult, anomaly: false,
              component: "boost sensor" }],
            sensor_hypothesis: true,
            log_id: "log2",
          },
        }), 201));
      const { root } = mount(stub);
      await flush();
      root.querySelector<HTMLInputElement>("#wizard-vin")!.value = VIN;
      submitForm(root, "form.wizard-start");
      await flush();

      expect(root.querySelector("h3.no-diagnosis")!.textContent)
        .toBe("No diagnosis");
      expect(root.querySelector(".report-card")!.textContent)
        .toContain("The sensor that reported P2563 may itself be faulty");
      expect(root.querySelectorAll("figure.fault-path").length).toBe(0);
    });

  it("marks a dependency cycle instead of picking a false root",
    async () => {
      const stub = new GatewayStub()
        .on("GET", "/models", () => ok({ models: [] }))
        .on("POST", "/sessions", () => ok(session({
          state: "DONE",
          report: {
            ...emptyReport(VIN),
            dtcs: ["P0100"],
            results: [manualResult],
            anomalous: ["R1", "R2", "R3"],
            fault_paths: [{
              components: ["R1", "R2", "R3"],
              cycle: true,
              id: "p9",
            }],
            log_id: "log3",
          },
        }), 201));
      const { root } = mount(stub);
      await flush();
      root.querySelector<HTMLInputElement>("#wizard-vin")!.value = VIN;
      submitForm(root, "form.wizard-start");
      await flush();

      const figure = root.querySelector("figure.fault-path")!;
      expect(figure.querySelector(".cycle-badge")).not.toBeNull();
      expect(figure.querySelector("figcaption")!.textContent)
        .toMatch(/no unique root cause/);
    });
});
