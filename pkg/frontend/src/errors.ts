/** Service errors, surfaced with the native error name preserved. */

export class MmforgeError extends Error {
  /** HTTP status the service answered with. */
  readonly status: number;

  constructor(name: string, detail: string, status: number) {
    super(detail);
    this.name = name; // e.g. "MalformedSyntax", "InfeasibleCandidate"
    this.status = status;
  }
}

interface ErrorBody {
  error?: string;
  detail?: unknown;
}

/** Build a typed error from a non-2xx service response body. */
export function errorFromResponse(status: number, body: unknown): MmforgeError {
  const parsed = (body ?? {}) as ErrorBody;
  const name = typeof parsed.error === "string" ? parsed.error : `HTTP${status}`;
  const detail =
    typeof parsed.detail === "string" ? parsed.detail : JSON.stringify(body);
  return new MmforgeError(name, detail, status);
}
