export { MmforgeClient } from "./client.js";
export type { ClientOptions, ParseOptions } from "./client.js";
export { MmforgeError } from "./errors.js";
export type {
  BlockFrame,
  CloseAccuracyResult,
  GroundedPoint,
  GroundingBlock,
  Kind,
  PackBudget,
  PackCandidate,
  PackSummary,
  PackedSequence,
  ParseResult,
  TaskKind,
} from "./types.js";
