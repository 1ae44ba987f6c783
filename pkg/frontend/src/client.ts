/**
 * HTTP client for the mmforge service.
 *
 * Exposes the pieces a data-pipeline host needs: the grounding
 * parser/serializer, a streaming packer (async-iterable, one packed sequence
 * at a time), token weighting, and the counting metric. Only plain data
 * crosses the boundary; domain failures throw MmforgeError carrying the
 * service's native error name.
 */

import { MmforgeError, errorFromResponse } from "./errors.js";
import type {
  CloseAccuracyResult,
  GradScaleResult,
  GroundingBlock,
  Kind,
  PackBudget,
  PackCandidate,
  PackSummary,
  PackedSequence,
  ParseResult,
  TaskKind,
} from "./types.js";

export interface ClientOptions {
  /** e.g. "http://127.0.0.1:8321" */
  baseUrl: string;
  fetch?: typeof fetch;
}

export interface ParseOptions {
  kindHint?: Kind;
  /** Repair recoverable violations instead of rejecting them. */
  lenient?: boolean;
}

export class MmforgeClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.fetchImpl = options.fetch ?? fetch;
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body: unknown = await resp.json();
    if (!resp.ok) {
      throw errorFromResponse(resp.status, body);
    }
    return body as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    const resp = await this.fetchImpl(`${this.baseUrl}/health`);
    if (!resp.ok) {
      throw new MmforgeError("Unhealthy", `status ${resp.status}`, resp.status);
    }
    return (await resp.json()) as { status: string; version: string };
  }

  /** Parse a `<points …>` / `<tracks …>` answer into a structured block. */
  parse(text: string, options: ParseOptions = {}): Promise<ParseResult> {
    return this.post<ParseResult>("/grounding/parse", {
      text,
      kind_hint: options.kindHint ?? null,
      lenient: options.lenient ?? false,
    });
  }

  /** Canonical text form of a block; inverse of parse. */
  async serialize(block: GroundingBlock): Promise<string> {
    const body = await this.post<{ text: string }>("/grounding/serialize", {
      block,
    });
    return body.text;
  }

  /** Object count encoded by an answer (its maximum object id). */
  async count(text: string): Promise<number> {
    const body = await this.post<{ count: number }>("/grounding/count", { text });
    return body.count;
  }

  /** Loss weight for an answer of n tokens under the given task kind. */
  async tokenWeight(kind: TaskKind, n: number): Promise<number> {
    const body = await this.post<{ weight: number }>("/weights/token", { kind, n });
    return body.weight;
  }

  /** Shared per-device loss divisor for the given loss-token counts. */
  async gradScale(counts: number[]): Promise<number> {
    const body = await this.post<GradScaleResult>("/weights/grad-scale", { counts });
    return body.scale;
  }

  /** Close/exact counting accuracy over [pred, gt] pairs. */
  closeAccuracy(pairs: Array<[number, number]>): Promise<CloseAccuracyResult> {
    return this.post<CloseAccuracyResult>("/metrics/close-accuracy", { pairs });
  }

  /** One optimal packed subset of the candidate pool. */
  packSolve(
    candidates: PackCandidate[],
    budget: PackBudget = {},
  ): Promise<PackedSequence> {
    return this.post<PackedSequence>("/pack/solve", { candidates, budget });
  }

  /**
   * Pack a whole manifest and iterate the resulting sequences one at a time,
   * matching the order and contents of the native packer exactly. Suits a
   * streaming data-loader worker; call `next()` as sequences are consumed.
   */
  async *packStream(
    candidates: PackCandidate[],
    budget: PackBudget = {},
  ): AsyncGenerator<PackedSequence, PackSummary, void> {
    const body = await this.post<{
      sequences: PackedSequence[];
      summary: PackSummary;
    }>("/pack/stream", { candidates, budget });
    for (const seq of body.sequences) {
      yield seq;
    }
    return body.summary;
  }
}
