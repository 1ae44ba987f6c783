/** Wire types mirroring the mmforge service schemas one-to-one. */

export type Kind = "points" | "tracks";

export interface GroundedPoint {
  id: number;
  x: number;
  y: number;
}

export interface BlockFrame {
  /** Video timestamp in seconds (one decimal place), or null for images. */
  t?: number | null;
  /** 1-based image index, or null for video frames. */
  image?: number | null;
  points: GroundedPoint[];
}

export interface GroundingBlock {
  kind: Kind;
  frames: BlockFrame[];
  text: string;
}

export interface ParseResult {
  block: GroundingBlock;
  count: number;
  /** Canonical re-serialization of the parsed block. */
  canonical: string;
  /** Per-category repair counts; only present for lenient parses. */
  violations?: Record<string, number> | null;
}

export interface PackCandidate {
  id: string;
  text_tokens: number;
  crops: number;
}

export interface PackBudget {
  max_tokens?: number;
  max_crops?: number;
  crop_weight?: number;
  quantum?: number;
  pool_size?: number;
}

export interface PackedSequence {
  ids: string[];
  tokens: number;
  quantized: number;
  crops: number;
  objective: number;
}

export interface PackSummary {
  sequences: number;
  examples: number;
  mean_examples_per_sequence: number;
  token_utilization: number;
  crop_utilization: number;
}

export type TaskKind = "video_caption" | "pointing" | "other";

export interface CloseAccuracyResult {
  close: boolean[];
  exact: boolean[];
  close_accuracy: number;
  exact_accuracy: number;
}

export interface GradScaleResult {
  scale: number;
}
