import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import {
  boundMorph,
  boundObjective,
  checkKernel,
  encodeTensor,
  runKernel,
} from "../src/index.js";

/** Deterministic pseudo-random float32 fixtures (mulberry32). */
function fixture(seed: number, rows: number, cols: number): Float32Array {
  let a = seed >>> 0;
  const next = () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) data[i] = Math.fround(next() * 2 - 1);
  return data;
}

const scratch = mkdtempSync(join(tmpdir(), "dtm-parity-"));
afterAll(() => rmSync(scratch, { recursive: true, force: true }));

describe("kernel handshake", () => {
  it("answers on the expected wire format", () => {
    expect(checkKernel()).toBe(true);
  });
});

describe("morph parity against the kernel CLI", () => {
  it("matches the direct CLI output byte for byte on 20 fixtures", () => {
    for (let i = 0; i < 20; i++) {
      const rows = 8 + 3 * i;
      const cols = 4 + (i % 5);
      const seed = 1000 + i;
      const tokens = fixture(7 * i + 1, rows, cols);

      const viaBinding = boundMorph(tokens, rows, cols, {
        seed,
        kMax: 5,
        split: i % 2 ? "random" : "alternating",
        mode: i % 3 ? "sizeweighted" : "paperliteral",
      });

      const file = join(scratch, `fixture-${i}.dtmt`);
      writeFileSync(file, encodeTensor(tokens, [rows, cols]));
      const direct = runKernel([
        "morph",
        "--targets", file,
        "--seed", String(seed),
        "--k-max", "5",
        "--split", i % 2 ? "random" : "alternating",
        "--mode", i % 3 ? "sizeweighted" : "paperliteral",
      ]);

      expect(viaBinding.raw).toBe(direct);
      const doc = JSON.parse(direct);
      expect(Array.from(viaBinding.assignment)).toEqual(doc.assignment);
      expect(Array.from(viaBinding.weights)).toEqual(doc.weights);
      expect(viaBinding.weights.reduce((a, b) => a + b, 0)).toBe(rows);
    }
  }, 120_000);

  it("is deterministic for a fixed seed", () => {
    const tokens = fixture(99, 24, 6);
    const first = boundMorph(tokens, 24, 6, { seed: 4242 });
    const second = boundMorph(tokens, 24, 6, { seed: 4242 });
    expect(first.raw).toBe(second.raw);
  }, 60_000);

  it("honors a pinned group count", () => {
    const tokens = fixture(5, 12, 4);
    const result = boundMorph(tokens, 12, 4, { seed: 1, nFinal: 12 });
    expect(result.nGroups).toBe(12);
    expect(Array.from(result.assignment)).toEqual([...Array(12).keys()]);
  }, 60_000);
});

describe("objective parity against the kernel CLI", () => {
  it("agrees with a direct CLI run within 1e-6", () => {
    const online = fixture(11, 20, 5);
    const targets = fixture(12, 20, 5);
    const viaBinding = boundObjective(online, targets, 20, 5, { seed: 77, schedules: 2 });

    const onlineFile = join(scratch, "online.dtmt");
    const targetsFile = join(scratch, "targets.dtmt");
    writeFileSync(onlineFile, encodeTensor(online, [20, 5]));
    writeFileSync(targetsFile, encodeTensor(targets, [20, 5]));
    const direct = JSON.parse(
      runKernel([
        "loss",
        "--online", onlineFile,
        "--targets", targetsFile,
        "--seed", "77",
        "--L", "2",
      ]),
    );

    expect(Math.abs(viaBinding.total - direct.total)).toBeLessThanOrEqual(
      1e-6 * Math.max(1, Math.abs(direct.total)),
    );
    expect(viaBinding.perSchedule.length).toBe(2);
    expect(viaBinding.perSchedule.map((s) => s.total)).toEqual(
      direct.per_schedule.map((s: any) => s.total),
    );
  }, 60_000);

  it("self-alignment gives a zero loss and zero gradient", () => {
    const tokens = fixture(3, 16, 4);
    const result = boundObjective(tokens, tokens, 16, 4, { seed: 5, withGradient: true });
    expect(result.total).toBe(0);
    expect(result.gradNorm).toBe(0);
    expect(result.gradient).toBeDefined();
    expect(Math.max(...Array.from(result.gradient!).map(Math.abs))).toBe(0);
  }, 60_000);
});
