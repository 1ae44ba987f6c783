/**
 * Differential parity: the TypeScript client must agree with the native CLI
 * on the whole shared fixture corpus with zero divergences. The fixtures
 * (inputs plus expected outputs produced by the native side) are generated
 * by scripts/gen_fixtures.py.
 */

import { readFileSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, inject, test } from "vitest";

import { MmforgeClient, MmforgeError } from "../src/index.js";
import type { PackedSequence } from "../src/index.js";

const FIXTURES = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "../fixtures");

function readJsonl<T = any>(name: string): T[] {
  const raw = readFileSync(path.join(FIXTURES, name), "utf-8");
  return raw
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

function client(): MmforgeClient {
  return new MmforgeClient({ baseUrl: inject("baseUrl") });
}

/** Run jobs with bounded concurrency, preserving input order of results. */
async function mapPooled<T, R>(
  items: T[],
  limit: number,
  fn: (item: T) => Promise<R>,
): Promise<R[]> {
  const results = new Array<R>(items.length);
  let next = 0;
  async function worker(): Promise<void> {
    while (next < items.length) {
      const i = next++;
      results[i] = await fn(items[i]);
    }
  }
  await Promise.all(Array.from({ length: limit }, worker));
  return results;
}

/** Structural equality over JSON values, insensitive to object key order. */
function sameJson(a: unknown, b: unknown): boolean {
  if (a === b) return true;
  if (Array.isArray(a) && Array.isArray(b)) {
    return a.length === b.length && a.every((v, i) => sameJson(v, b[i]));
  }
  if (a && b && typeof a === "object" && typeof b === "object") {
    const ka = Object.keys(a as object).sort();
    const kb = Object.keys(b as object).sort();
    return (
      sameJson(ka, kb) &&
      ka.every((k) => sameJson((a as any)[k], (b as any)[k]))
    );
  }
  return false;
}

describe("grounding parser parity", () => {
  test("zero divergences against the native CLI dump", async () => {
    const corpus = readJsonl<{ id: string; answer: string }>("grounding_corpus.jsonl");
    const expected = readJsonl<any>("grounding_expected.jsonl").slice(1); // drop meta
    const expectedById = new Map(expected.map((row) => [row.id, row]));
    const c = client();

    const divergences: string[] = [];
    await mapPooled(corpus, 16, async (record) => {
      const want = expectedById.get(record.id);
      if (!want) {
        divergences.push(`${record.id}: missing expected row`);
        return;
      }
      try {
        const got = await c.parse(record.answer);
        if (!want.ok) {
          divergences.push(`${record.id}: parsed but native rejected (${want.error})`);
          return;
        }
        if (!sameJson(got.block, want.block)) {
          divergences.push(`${record.id}: block mismatch`);
        }
        if (got.canonical !== want.canonical) {
          divergences.push(`${record.id}: canonical text mismatch`);
        }
        if (got.count !== want.count) {
          divergences.push(`${record.id}: count ${got.count} != ${want.count}`);
        }
        const roundtrip = await c.serialize(got.block);
        if (roundtrip !== want.canonical) {
          divergences.push(`${record.id}: serialize round-trip mismatch`);
        }
      } catch (err) {
        if (!(err instanceof MmforgeError)) {
          throw err;
        }
        if (want.ok) {
          divergences.push(`${record.id}: rejected (${err.name}) but native parsed`);
        } else if (err.name !== want.error) {
          divergences.push(`${record.id}: error ${err.name} != ${want.error}`);
        }
      }
    });
    expect(divergences).toEqual([]);
  });

  test("count endpoint matches the parsed block's count", async () => {
    const c = client();
    const answer =
      '<points coords="1 1 555 169;2 3 649 154 4 709 162;5 5 758 175 6 808 183 7 852 187">txt</points>';
    expect(await c.count(answer)).toBe(7);
  });

  test("malformed input surfaces the native error name", async () => {
    const c = client();
    await expect(c.parse("garbage")).rejects.toMatchObject({
      name: "MalformedSyntax",
    });
    await expect(
      c.parse('<points coords="1 1 2000 3">x</points>'),
    ).rejects.toMatchObject({ name: "CoordOutOfRange" });
  });
});

interface ExpectedPackFile {
  sequences: PackedSequence[];
  summary: Record<string, number>;
}

function readExpectedPack(name: string): ExpectedPackFile {
  const rows = readJsonl<any>(name);
  const sequences = rows.slice(1, -1) as PackedSequence[];
  const summary = rows[rows.length - 1].summary as Record<string, number>;
  return { sequences, summary };
}

describe("packer parity", () => {
  test("default budget stream matches cmd pack exactly", async () => {
    const manifest = readJsonl<{ id: string; text_tokens: number; crops: number }>(
      "pack_manifest.jsonl",
    );
    const want = readExpectedPack("pack_expected_default.jsonl");
    const got: PackedSequence[] = [];
    for await (const seq of client().packStream(manifest)) {
      got.push(seq);
    }
    expect(got).toEqual(want.sequences);
  });

  test("custom budget stream matches cmd pack exactly", async () => {
    const manifest = readJsonl<{ id: string; text_tokens: number; crops: number }>(
      "pack_manifest_small.jsonl",
    );
    const want = readExpectedPack("pack_expected_small.jsonl");
    const budget = {
      max_tokens: 2048,
      max_crops: 16,
      crop_weight: 11,
      quantum: 64,
      pool_size: 7,
    };
    const stream = client().packStream(manifest, budget);
    const got: PackedSequence[] = [];
    let result = await stream.next();
    while (!result.done) {
      got.push(result.value);
      result = await stream.next();
    }
    expect(got).toEqual(want.sequences);
    // the generator's return value carries the same summary the CLI reports
    expect(result.value).toEqual(want.summary);
  });

  test("empty manifest yields an empty iterator", async () => {
    const stream = client().packStream([]);
    expect((await stream.next()).done).toBe(true);
  });

  test("infeasible candidate raises the native error name", async () => {
    const bad = [{ id: "big", text_tokens: 999999, crops: 0 }];
    const stream = client().packStream(bad);
    await expect(stream.next()).rejects.toMatchObject({
      name: "InfeasibleCandidate",
    });
  });
});

describe("weights and counting parity", () => {
  test("token weights are bit-identical", async () => {
    const cases = readJsonl<{ kind: any; n: number; weight: number }>(
      "weights_expected.jsonl",
    );
    const c = client();
    const mismatches: string[] = [];
    await mapPooled(cases, 8, async ({ kind, n, weight }) => {
      const got = await c.tokenWeight(kind, n);
      if (got !== weight) {
        mismatches.push(`${kind}/${n}: ${got} != ${weight}`);
      }
    });
    expect(mismatches).toEqual([]);
  });

  test("gradient scales are bit-identical", async () => {
    const cases = readJsonl<{ counts: number[]; scale: number }>(
      "grad_scale_expected.jsonl",
    );
    const c = client();
    for (const { counts, scale } of cases) {
      expect(await c.gradScale(counts)).toBe(scale);
    }
  });

  test("close accuracy agrees on the whole pair table", async () => {
    const cases = readJsonl<{ pred: number; gt: number; close: boolean; exact: boolean }>(
      "close_accuracy_expected.jsonl",
    );
    const pairs = cases.map(({ pred, gt }) => [pred, gt] as [number, number]);
    const got = await client().closeAccuracy(pairs);
    expect(got.close).toEqual(cases.map((c) => c.close));
    expect(got.exact).toEqual(cases.map((c) => c.exact));
  });
});
