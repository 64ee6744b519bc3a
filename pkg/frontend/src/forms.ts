/** Knowledge acquisition forms.
 *
 * Three form kinds (suspect component, fault context, component set).
 * Client checks gate submission but stay a subset of the server's
 * rules; a server rejection is rendered on the offending field when it
 * can be attributed, otherwise as a form-level banner.  Because the
 * backend enhancers are idempotent, a resubmission that changes
 * nothing is detected by comparing the store revision around the call
 * and surfaced as a "merged, no changes" notice.
 */

import { ApiError, GatewayClient } from "./api.js";
import type { FieldErrors } from "./validation.js";
import {
  splitList,
  validateComponent,
  validateComponentSet,
  validateFaultContext,
} from "./validation.js";

type Attrs = Record<string, string>;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function field(
  label: string,
  name: string,
  input: HTMLElement,
): HTMLElement {
  const error = el("p", { class: "field-error", "data-error-for": name });
  return el("div", { class: "field" },
    el("label", { for: `field-${name}` }, label),
    input,
    error);
}

function textInput(name: string, placeholder = ""): HTMLInputElement {
  return el("input", {
    type: "text",
    id: `field-${name}`,
    name,
    placeholder,
  });
}

function textArea(name: string, placeholder = ""): HTMLTextAreaElement {
  return el("textarea", { id: `field-${name}`, name, rows: "3",
    placeholder });
}

function showErrors(form: HTMLElement, errors: FieldErrors): void {
  for (const slot of form.querySelectorAll<HTMLElement>("[data-error-for]")) {
    const name = slot.dataset.errorFor as string;
    slot.textContent = errors[name] ?? "";
  }
}

function banner(form: HTMLElement, kind: string, text: string): void {
  const slot = form.querySelector<HTMLElement>(".form-status");
  if (slot) {
    slot.className = `form-status ${kind}`;
    slot.textContent = text;
  }
}

/** Route a gateway rejection to a field when the message names one. */
export function attributeServerError(
  error: ApiError,
  routes: Record<string, string[]>,
): { field: string | null; message: string } {
  if (error.code === "body") {
    // "dtc_code: field required" style messages from body validation
    const prefix = error.message.split(":", 1)[0].trim();
    const leaf = prefix.split(".").pop() ?? prefix;
    for (const fieldName of Object.keys(routes)) {
      if (leaf === fieldName) {
        return { field: fieldName, message: error.message };
      }
    }
  }
  const lowered = error.message.toLowerCase();
  for (const [fieldName, needles] of Object.entries(routes)) {
    if (needles.some((needle) => lowered.includes(needle))) {
      return { field: fieldName, message: error.message };
    }
  }
  return { field: null, message: error.message };
}

interface SubmitOutcome {
  summary: HTMLElement | string;
  merged: boolean;
}

/** Wire validate -> revision check -> POST -> render for one form. */
function wireSubmit(
  form: HTMLFormElement,
  client: GatewayClient,
  validate: () => FieldErrors,
  submit: () => Promise<HTMLElement | string>,
  routes: Record<string, string[]>,
): void {
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void (async () => {
      const errors = validate();
      showErrors(form, errors);
      banner(form, "", "");
      if (Object.keys(errors).length > 0) {
        return;
      }
      let before: number | null = null;
      try {
        before = (await client.health()).revision;
      } catch {
        // the POST itself will surface unreachability
      }
      try {
        const summary = await submit();
        const after = (await client.health()).revision;
        const merged = before !== null && after === before;
        banner(form, merged ? "notice" : "success",
          merged ? "merged, no changes: this knowledge is already recorded"
            : "");
        const result = form.querySelector<HTMLElement>(".form-result");
        if (result) {
          result.replaceChildren(
            typeof summary === "string" ? el("p", {}, summary) : summary);
        }
      } catch (error) {
        if (!(error instanceof ApiError)) throw error;
        const routed = attributeServerError(error, routes);
        if (routed.field !== null) {
          showErrors(form, { [routed.field]: routed.message });
        } else {
          banner(form, "error", `${error.code}: ${error.message}`);
        }
      }
    })();
  });
}

function summaryList(entries: [string, string][]): HTMLElement {
  const list = el("dl", { class: "summary" });
  for (const [term, value] of entries) {
    list.append(el("dt", {}, term), el("dd", {}, value));
  }
  return list;
}

// ----------------------------------------------------------------------
// suspect component

export function componentForm(client: GatewayClient): HTMLFormElement {
  const name = textInput("name", "boost pressure sensor");
  const oscilloscope = el("input", {
    type: "checkbox", id: "field-use_oscilloscope",
    name: "use_oscilloscope",
  });
  const affectedBy = textArea("affected_by",
    "one affecting component per line");
  const containedIn = textInput("contained_in", "optional subsystem");
  const lookup = textInput("component-lookup", "name to load");
  const form = el("form", { class: "knowledge-form", "data-kind": "component" },
    el("h3", {}, "Suspect component"),
    el("div", { class: "lookup-row" },
      lookup,
      el("button", { type: "button", class: "lookup" }, "Load existing")),
    field("Name", "name", name),
    el("div", { class: "field checkbox" },
      el("label", { for: "field-use_oscilloscope" },
        "oscilloscope measurement required"),
      oscilloscope,
      el("p", { class: "field-error", "data-error-for": "use_oscilloscope" })),
    field("Affected by", "affected_by", affectedBy),
    field("Contained in", "contained_in", containedIn),
    el("button", { type: "submit" }, "Save component"),
    el("p", { class: "form-status" }),
    el("div", { class: "form-result" }));

  form.querySelector<HTMLButtonElement>("button.lookup")!
    .addEventListener("click", () => {
      void (async () => {
        banner(form, "", "");
        try {
          const details = await client.getComponent(lookup.value.trim());
          name.value = details.name;
          oscilloscope.checked = details.use_oscilloscope;
          affectedBy.value = details.affected_by.join("\n");
          banner(form, "notice",
            `loaded "${details.name}" for refinement`);
        } catch (error) {
          if (!(error instanceof ApiError)) throw error;
          banner(form, "error", error.message);
        }
      })();
    });

  wireSubmit(
    form,
    client,
    () => validateComponent({
      name: name.value,
      use_oscilloscope: oscilloscope.checked,
      affected_by: splitList(affectedBy.value),
    }),
    async () => {
      const created = await client.addComponent({
        name: name.value.trim(),
        use_oscilloscope: oscilloscope.checked,
        affected_by: splitList(affectedBy.value),
        contained_in: containedIn.value.trim() || null,
      });
      const details = await client.getComponent(created.name);
      return summaryList([
        ["entity", created.id],
        ["name", details.name],
        ["oscilloscope", details.use_oscilloscope ? "yes" : "no"],
        ["affected by", details.affected_by.join(", ") || "nothing"],
      ]);
    },
    {
      name: ["component name", "name must"],
      affected_by: ["affected"],
      contained_in: ["subsystem", "contained"],
    },
  );
  return form;
}

// ----------------------------------------------------------------------
// fault context

export function faultContextForm(client: GatewayClient): HTMLFormElement {
  const dtc = textInput("dtc_code", "P2563");
  const condition = textArea("condition_text",
    "observed fault condition");
  const symptoms = textArea("symptoms", "one symptom per line");
  const associations = textArea("associations",
    "component, priority   (one per line)");
  const lookup = textInput("context-lookup", "DTC to load");
  const form = el("form", {
    class: "knowledge-form", "data-kind": "fault-context" },
    el("h3", {}, "Fault context"),
    el("div", { class: "lookup-row" },
      lookup,
      el("button", { type: "button", class: "lookup" }, "Load existing")),
    field("DTC", "dtc_code", dtc),
    field("Fault condition", "condition_text", condition),
    field("Symptoms", "symptoms", symptoms),
    field("Suspect components", "associations", associations),
    el("button", { type: "submit" }, "Save fault context"),
    el("p", { class: "form-status" }),
    el("div", { class: "form-result" }));

  // one "component, priority" pair per line, so split on newlines only
  const parseAssociations = () =>
    associations.value
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line !== "")
      .map((line) => {
        const [component, priority] = line.split(/[,;]/).map((p) => p.trim());
        return { component: component ?? "", priority: Number(priority) };
      });

  form.querySelector<HTMLButtonElement>("button.lookup")!
    .addEventListener("click", () => {
      void (async () => {
        banner(form, "", "");
        try {
          const details = await client.getFaultContext(lookup.value.trim());
          dtc.value = details.dtc_code;
          condition.value = details.condition;
          symptoms.value = details.symptoms.join("\n");
          associations.value = details.suspects
            .map((s) => `${s.component}, ${s.priority}`)
            .join("\n");
          banner(form, "notice",
            `loaded ${details.dtc_code} for refinement`);
        } catch (error) {
          if (!(error instanceof ApiError)) throw error;
          banner(form, "error", error.message);
        }
      })();
    });

  wireSubmit(
    form,
    client,
    () => validateFaultContext({
      dtc_code: dtc.value,
      condition_text: condition.value,
      symptoms: splitList(symptoms.value),
      associations: parseAssociations(),
    }),
    async () => {
      const created = await client.addFaultContext({
        dtc_code: dtc.value.trim(),
        condition_text: condition.value.trim(),
        symptoms: splitList(symptoms.value),
        associations: parseAssociations(),
      });
      const details = await client.getFaultContext(created.dtc_code);
      return summaryList([
        ["entity", created.id],
        ["DTC", details.dtc_code],
        ["condition", details.condition],
        ["symptoms", details.symptoms.join(", ") || "none"],
        ["suspects", details.suspects
          .map((s) => `${s.component} (${s.priority})`)
          .join(", ") || "none"],
      ]);
    },
    {
      dtc_code: ["dtc"],
      condition_text: ["condition"],
      associations: ["priorit", "association", "suspect"],
    },
  );
  return form;
}

// ----------------------------------------------------------------------
// component set

export function componentSetForm(client: GatewayClient): HTMLFormElement {
  const name = textInput("set-name", "intake path");
  const members = textArea("members", "one component per line");
  const verifiedBy = textInput("verified_by",
    "component whose check verifies the set");
  const form = el("form", {
    class: "knowledge-form", "data-kind": "component-set" },
    el("h3", {}, "Component set"),
    field("Name", "name", name),
    field("Members", "members", members),
    field("Verified by", "verified_by", verifiedBy),
    el("button", { type: "submit" }, "Save component set"),
    el("p", { class: "form-status" }),
    el("div", { class: "form-result" }));

  wireSubmit(
    form,
    client,
    () => validateComponentSet({
      name: name.value,
      members: splitList(members.value),
      verified_by: verifiedBy.value,
    }),
    async () => {
      const created = await client.addComponentSet({
        name: name.value.trim(),
        members: splitList(members.value),
        verified_by: verifiedBy.value.trim(),
      });
      return summaryList([
        ["entity", created.id],
        ["name", created.name],
        ["members", splitList(members.value).join(", ")],
        ["verified by", verifiedBy.value.trim()],
      ]);
    },
    {
      name: ["set name", "name must"],
      members: ["member"],
      verified_by: ["verif"],
    },
  );
  return form;
}

export function knowledgePanel(client: GatewayClient): HTMLElement {
  return el("section", { class: "knowledge-panel" },
    componentForm(client),
    faultContextForm(client),
    componentSetForm(client));
}
