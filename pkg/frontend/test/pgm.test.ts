import { describe, expect, it } from "vitest";

import { decodePgm } from "../src/pgm.js";

function pgmBytes(header: string, payload: number[]): Uint8Array {
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + payload.length);
  out.set(head);
  out.set(payload, head.length);
  return out;
}

describe("decodePgm", () => {
  it("decodes a canonical 2x2 file", () => {
    const bitmap = decodePgm(pgmBytes("P5\n2 2\n255\n", [0, 255, 128, 64]));
    expect(bitmap.width).toBe(2);
    expect(bitmap.height).toBe(2);
    expect(Array.from(bitmap.gray)).toEqual([0, 255, 128, 64]);
  });

  it("tolerates comments and mixed whitespace", () => {
    const bitmap = decodePgm(pgmBytes("P5 # c\n # d\n 2\t1 \n255 ", [9, 10]));
    expect(bitmap.width).toBe(2);
    expect(bitmap.height).toBe(1);
    expect(Array.from(bitmap.gray)).toEqual([9, 10]);
  });

  it("rejects non-P5 data", () => {
    expect(() => decodePgm(pgmBytes("P2\n1 1\n255\n", [0]))).toThrow(/P5/);
  });

  it("rejects wide maxval", () => {
    expect(() => decodePgm(pgmBytes("P5\n1 1\n65535\n", [0, 0]))).toThrow(/maxval/);
  });

  it("rejects truncated payloads", () => {
    expect(() => decodePgm(pgmBytes("P5\n4 4\n255\n", [1, 2, 3]))).toThrow(/truncated/);
  });
});
