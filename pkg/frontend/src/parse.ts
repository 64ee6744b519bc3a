/** Oscillogram uploads: one series as CSV numbers or a JSON array. */

export class OscillogramParseError extends Error {}

export function parseOscillogramText(text: string): number[] {
  const trimmed = text.trim();
  if (trimmed === "") {
    throw new OscillogramParseError("the file is empty");
  }
  let raw: unknown[];
  if (trimmed.startsWith("[")) {
    let parsed: unknown;
    try {
      parsed = JSON.parse(trimmed);
    } catch {
      throw new OscillogramParseError("malformed JSON array");
    }
    if (!Array.isArray(parsed)) {
      throw new OscillogramParseError("JSON input must be an array");
    }
    raw = parsed;
  } else {
    // CSV: values separated by commas, semicolons or whitespace,
    // possibly spread over multiple lines
    raw = trimmed.split(/[\s,;]+/);
  }
  const values = raw.map((item, index) => {
    const value = typeof item === "number" ? item : Number(item);
    if (!Number.isFinite(value)) {
      throw new OscillogramParseError(
        `entry ${index + 1} (${String(item)}) is not a finite number`,
      );
    }
    return value;
  });
  if (values.length < 2) {
    throw new OscillogramParseError("a series needs at least two samples");
  }
  return values;
}
