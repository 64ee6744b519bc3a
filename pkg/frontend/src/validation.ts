/** Client-side form checks.
 *
 * Deliberately a subset of what the server enforces: anything accepted
 * here can still be rejected by the gateway, and that rejection is
 * rendered on the form.  The reverse never holds.
 */

import type {
  ComponentForm,
  ComponentSetForm,
  FaultContextForm,
} from "./types.js";

// mirrors the server's rule: one letter, then four digits
export const DTC_PATTERN = /^[A-Za-z][0-9]{4}$/;

export type FieldErrors = Record<string, string>;

export function validateComponent(form: ComponentForm): FieldErrors {
  const errors: FieldErrors = {};
  if (form.name.trim() === "") {
    errors.name = "component name is required";
  }
  if (form.affected_by.some((name) => name.trim() === "")) {
    errors.affected_by = "affecting component names must not be blank";
  }
  return errors;
}

export function validateFaultContext(form: FaultContextForm): FieldErrors {
  const errors: FieldErrors = {};
  if (form.dtc_code.trim() === "") {
    errors.dtc_code = "DTC is required";
  } else if (!DTC_PATTERN.test(form.dtc_code.trim())) {
    errors.dtc_code = "expected a letter followed by four digits";
  }
  if (form.condition_text.trim() === "") {
    errors.condition_text = "fault condition text is required";
  }
  const priorities = form.associations.map((a) => a.priority);
  if (new Set(priorities).size !== priorities.length) {
    errors.associations = "association priorities must be unique";
  } else if (form.associations.some((a) => a.component.trim() === "")) {
    errors.associations = "every association needs a component name";
  } else if (priorities.some((p) => !Number.isInteger(p) || p < 1)) {
    errors.associations = "priorities are integers starting at 1";
  }
  return errors;
}

export function validateComponentSet(form: ComponentSetForm): FieldErrors {
  const errors: FieldErrors = {};
  if (form.name.trim() === "") {
    errors.name = "set name is required";
  }
  if (form.members.length === 0 ||
      form.members.every((m) => m.trim() === "")) {
    errors.members = "list at least one member component";
  }
  if (form.verified_by.trim() === "") {
    errors.verified_by = "name the component that verifies the set";
  }
  return errors;
}

export function validateVin(vin: string): FieldErrors {
  return vin.trim() === "" ? { vin: "VIN is required" } : {};
}

/** Split a comma- or newline-separated list into trimmed entries. */
export function splitList(text: string): string[] {
  return text
    .split(/[\n,]/)
    .map((part) => part.trim())
    .filter((part) => part !== "");
}
