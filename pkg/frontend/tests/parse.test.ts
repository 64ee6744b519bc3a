import { describe, expect, it } from "vitest";

import {
  OscillogramParseError,
  parseOscillogramText,
} from "../src/parse.js";

describe("oscillogram parsing", () => {
  it("reads comma separated values", () => {
    expect(parseOscillogramText("0.5, -1.25, 3")).toEqual([0.5, -1.25, 3]);
  });

  it("reads multi-line and semicolon separated values", () => {
    expect(parseOscillogramText("1;2\n3 4\n5")).toEqual([1, 2, 3, 4, 5]);
  });

  it("reads a JSON array", () => {
    expect(parseOscillogramText(" [1, 2.5, -3] ")).toEqual([1, 2.5, -3]);
  });

  it("rejects JSON that is not an array of numbers", () => {
    expect(() => parseOscillogramText('{"a": 1}'))
      .toThrow(OscillogramParseError);
    expect(() => parseOscillogramText('["a", "b"]'))
      .toThrow(/entry 1/);
  });

  it("rejects empty and single-sample input", () => {
    expect(() => parseOscillogramText("  ")).toThrow(/empty/);
    expect(() => parseOscillogramText("42")).toThrow(/two samples/);
  });

  it("names the offending entry", () => {
    expect(() => parseOscillogramText("1, 2, x, 4"))
      .toThrow(/entry 3 \(x\)/);
  });
});
