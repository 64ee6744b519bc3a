/** Guided diagnosis wizard.
 *
 * The wizard never advances a session locally: the only session state
 * it holds is the last payload the gateway returned, every user action
 * is a round-trip, and the view is re-derived from that payload alone.
 * Out-of-turn submissions (HTTP 409) refresh the payload from the
 * server and tell the user to follow the instruction now shown.
 */

import { ApiError, GatewayClient } from "./api.js";
import { el } from "./forms.js";
import { renderFaultPath } from "./faultPath.js";
import { renderSeriesWithHeatmap } from "./heatmap.js";
import { OscillogramParseError, parseOscillogramText } from "./parse.js";
import { validateVin } from "./validation.js";
import type { Report, SessionPayload } from "./types.js";

export class SessionWizard {
  private readonly root: HTMLElement;
  private readonly client: GatewayClient;
  /** Last server payload; the sole source of rendered session state. */
  private current: SessionPayload | null = null;
  /** Series the user uploaded, by component, for heatmap overlays. */
  private readonly uploads = new Map<string, number[]>();
  /** Chain of pending handler work, awaitable by tests. */
  lastAction: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, client: GatewayClient) {
    this.root = root;
    this.client = client;
    this.renderStart();
  }

  get session(): SessionPayload | null {
    return this.current;
  }

  private track(work: () => Promise<void>): void {
    // serialize: work spawned while handling an action (heatmap
    // fetches after a render) extends the same awaitable chain
    this.lastAction = this.lastAction.then(work);
  }

  /** Adopt a server payload and re-render everything from it. */
  private show(payload: SessionPayload): void {
    this.current = payload;
    this.render();
  }

  private async act(call: () => Promise<SessionPayload>): Promise<void> {
    try {
      this.show(await call());
    } catch (error) {
      if (error instanceof ApiError && error.code === "protocol" &&
          this.current !== null) {
        // the session moved on without us; resync and guide the user
        const fresh = await this.client.getSession(
          this.current.session_id);
        this.show(fresh);
        this.setBanner("error",
          `out of turn: ${error.message}. The session state has been ` +
          "refreshed; follow the instruction shown below.");
      } else if (error instanceof ApiError) {
        this.setBanner("error", `${error.code}: ${error.message}`);
      } else {
        throw error;
      }
    }
  }

  private setBanner(kind: string, text: string): void {
    const slot = this.root.querySelector<HTMLElement>(".wizard-banner");
    if (slot) {
      slot.className = `wizard-banner ${kind}`;
      slot.textContent = text;
    }
  }

  // ------------------------------------------------------------------
  // start screen

  private renderStart(): void {
    const vin = el("input", {
      type: "text", id: "wizard-vin", placeholder: "vehicle VIN" });
    const model = el("input", {
      type: "text", id: "wizard-vehicle-model", placeholder: "model" });
    const classifier = el("select", { id: "wizard-model" },
      el("option", { value: "" }, "manual checks only"));
    const error = el("p", { class: "field-error", "data-error-for": "vin" });
    const form = el("form", { class: "wizard-start" },
      el("h3", {}, "Start diagnosis session"),
      el("div", { class: "field" },
        el("label", { for: "wizard-vin" }, "VIN"), vin, error),
      el("div", { class: "field" },
        el("label", { for: "wizard-vehicle-model" }, "Vehicle model"),
        model),
      el("div", { class: "field" },
        el("label", { for: "wizard-model" }, "Oscillogram classifier"),
        classifier),
      el("button", { type: "submit" }, "Start session"),
      el("p", { class: "wizard-banner" }));
    this.root.replaceChildren(form);

    this.track(async () => {
      try {
        const { models } = await this.client.listModels();
        for (const info of models) {
          classifier.append(el("option", { value: info.model_id },
            `${info.model_id} (length ${info.input_length})`));
        }
      } catch {
        // selector stays manual-only when the gateway has no models
      }
    });

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const errors = validateVin(vin.value);
      error.textContent = errors.vin ?? "";
      if (Object.keys(errors).length > 0) return;
      this.track(() => this.act(() => this.client.createSession({
        vin: vin.value.trim(),
        vehicle_model: model.value.trim() || "unknown",
        model_id: classifier.value === "" ? null : classifier.value,
      })));
    });
  }

  // ------------------------------------------------------------------
  // session screens, all derived from this.current

  private render(): void {
    const payload = this.current;
    if (payload === null) {
      this.renderStart();
      return;
    }
    const header = el("header", { class: "wizard-header" },
      el("span", { class: "session-id" }, `session ${payload.session_id}`),
      el("span", { class: "state-chip", "data-state": payload.state },
        payload.state));
    const banner = el("p", { class: "wizard-banner" });
    const instruction = this.instructionCard(payload);
    const history = this.historyCard(payload.report);
    const children: HTMLElement[] = [header, banner, instruction];
    if (payload.report.results.length > 0) {
      children.push(history);
    }
    if (payload.state === "DONE") {
      children.push(this.reportCard(payload.report));
    }
    this.root.replaceChildren(...children);
  }

  private instructionCard(payload: SessionPayload): HTMLElement {
    switch (payload.awaiting) {
      case "dtcs":
        return this.dtcsCard();
      case "oscillogram":
        return this.oscillogramCard(payload.current_component ?? "");
      case "manual":
        return this.manualCard(payload.current_component ?? "");
      default:
        return el("div", { class: "instruction-card done" },
          el("p", {}, "The session is complete; the report follows."));
    }
  }

  private dtcsCard(): HTMLElement {
    const codes = el("textarea", { id: "wizard-dtcs", rows: "2",
      placeholder: "P2563, C1234" });
    const card = el("form", { class: "instruction-card await-dtcs" },
      el("h4", {}, "Read out trouble codes"),
      el("p", {}, "Connect the diagnostic adapter, read the fault " +
        "memory and enter the codes."),
      codes,
      el("button", { type: "submit" }, "Submit codes"));
    card.addEventListener("submit", (event) => {
      event.preventDefault();
      const list = codes.value.split(/[\s,;]+/).filter((c) => c !== "");
      this.track(() => this.act(() => this.client.submitDtcs(
        this.current!.session_id, list)));
    });
    return card;
  }

  private oscillogramCard(component: string): HTMLElement {
    const paste = el("textarea", { id: "wizard-oscillogram", rows: "3",
      placeholder: "paste CSV values or a JSON array" });
    const file = el("input", { type: "file", id: "wizard-oscillogram-file",
      accept: ".csv,.json,.txt" });
    const parseError = el("p", { class: "field-error",
      "data-error-for": "oscillogram" });
    const card = el("form", { class: "instruction-card await-oscillogram" },
      el("h4", {}, `Record an oscillogram at: ${component}`),
      el("p", {}, "Attach the oscilloscope to the component and " +
        "upload the recorded series (CSV or JSON)."),
      file, paste, parseError,
      el("button", { type: "submit" }, "Classify recording"));

    const submitText = (text: string) => {
      let values: number[];
      try {
        values = parseOscillogramText(text);
      } catch (error) {
        if (error instanceof OscillogramParseError) {
          parseError.textContent = error.message;
          return;
        }
        throw error;
      }
      parseError.textContent = "";
      this.uploads.set(component, values);
      this.track(() => this.act(() => this.client.submitOscillogram(
        this.current!.session_id, values)));
    };

    card.addEventListener("submit", (event) => {
      event.preventDefault();
      const chosen = file.files?.[0];
      if (chosen) {
        void chosen.text().then(submitText);
      } else {
        submitText(paste.value);
      }
    });
    return card;
  }

  private manualCard(component: string): HTMLElement {
    const card = el("div", { class: "instruction-card await-manual" },
      el("h4", {}, `Inspect: ${component}`),
      el("p", {}, "Check the component by hand (visual inspection, " +
        "continuity, mechanical state) and record the verdict."));
    const anomalous = el("button", { type: "button",
      class: "verdict anomalous" }, "Anomalous");
    const normal = el("button", { type: "button",
      class: "verdict normal" }, "Normal");
    for (const [button, verdict] of
         [[anomalous, true], [normal, false]] as const) {
      button.addEventListener("click", () => {
        this.track(() => this.act(() => this.client.submitManual(
          this.current!.session_id, verdict)));
      });
    }
    card.append(anomalous, normal);
    return card;
  }

  private historyCard(report: Report): HTMLElement {
    const list = el("ul", { class: "classification-history" });
    for (const result of report.results) {
      const item = el("li", {
        class: result.anomaly ? "result anomalous" : "result normal" },
        el("span", { class: "component" }, result.component),
        el("span", { class: "badge" },
          result.anomaly ? "anomalous" : "normal"),
        el("span", { class: "method" }, result.method));
      if (result.uncertainty !== null) {
        item.append(el("span", { class: "uncertainty" },
          `uncertainty ${result.uncertainty.toFixed(3)}`));
      }
      if (result.heatmap_id !== null) {
        const slot = el("div", { class: "heatmap-slot",
          "data-heatmap-id": result.heatmap_id });
        item.append(slot);
        this.attachHeatmap(slot, result.component, result.heatmap_id);
      }
      list.append(item);
    }
    return el("div", { class: "history-card" },
      el("h4", {}, "Classifications so far"), list);
  }

  private attachHeatmap(
    slot: HTMLElement,
    component: string,
    heatmapId: string,
  ): void {
    this.track(async () => {
      try {
        const heatmap = await this.client.getHeatmap(heatmapId);
        const series = this.uploads.get(component);
        if (series && series.length === heatmap.values.length) {
          slot.replaceChildren(
            renderSeriesWithHeatmap(series, heatmap.values));
        } else {
          // no local copy of the recording: show the saliency alone
          slot.replaceChildren(
            renderSeriesWithHeatmap(heatmap.values, heatmap.values));
        }
        slot.append(el("span", { class: "method-tag" }, heatmap.method));
      } catch {
        slot.textContent = "heatmap unavailable";
      }
    });
  }

  private reportCard(report: Report): HTMLElement {
    const card = el("section", { class: "report-card" });
    if (report.sensor_hypothesis && report.fault_paths.length === 0) {
      card.append(
        el("h3", { class: "no-diagnosis" }, "No diagnosis"),
        el("p", {},
          "Every suspect component checked out fine. The sensor that " +
          `reported ${report.dtcs.join(", ")} may itself be faulty.`));
    } else {
      card.append(el("h3", {}, "Diagnosis report"));
    }
    card.append(el("p", { class: "report-meta" },
      `VIN ${report.vin} — codes: ${report.dtcs.join(", ") || "none"}`));
    if (report.fault_paths.length > 0) {
      const paths = el("div", { class: "fault-paths" },
        el("h4", {}, "Fault paths (root cause first)"));
      for (const path of report.fault_paths) {
        paths.append(renderFaultPath(path));
      }
      card.append(paths);
    }
    if (report.warnings.length > 0) {
      card.append(el("ul", { class: "warnings" },
        ...report.warnings.map((w) => el("li", {}, w))));
    }
    const artifacts = el("details", { class: "artifacts" },
      el("summary", {}, "Recorded artifacts"));
    const ids = el("ul", {});
    if (report.log_id !== null) {
      ids.append(el("li", {}, `diagnosis log: ${report.log_id}`));
    }
    for (const result of report.results) {
      ids.append(el("li", {},
        `classification ${result.component}: ${result.classification_id}`));
      if (result.heatmap_id !== null) {
        ids.append(el("li", {},
          `heatmap ${result.component}: ${result.heatmap_id}`));
      }
    }
    for (const path of report.fault_paths) {
      ids.append(el("li", {}, `fault path: ${path.id}`));
    }
    artifacts.append(ids);
    card.append(artifacts);
    return card;
  }
}

export function createWizard(
  root: HTMLElement,
  client: GatewayClient,
): SessionWizard {
  return new SessionWizard(root, client);
}
