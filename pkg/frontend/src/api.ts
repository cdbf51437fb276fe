/**
 * Typed client for the review service.
 *
 * Every numeric field in the wire format is a decimal string so values
 * survive JSON round trips without float re-parsing; this module keeps
 * them as strings and offers explicit converters for display math.
 */

export interface Candidate {
  id: string;
  image_url: string;
}

export interface RoundPayload {
  round_id: string;
  state: string;
  criteria: string[];
  candidates: Candidate[];
}

export interface LossPoint {
  round_id: string;
  loss: string;
  step_skipped: boolean;
}

export interface StatsPayload {
  rounds: string;
  counts: Record<string, string>;
  percentages: Record<string, string>;
  loss_history?: LossPoint[];
}

export interface SelectReply {
  round_id: string;
  loss: string;
  step_skipped: boolean;
  stats: StatsPayload;
  revealed: Record<string, string>;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

async function call<T>(
  fetchImpl: FetchLike,
  url: string,
  init?: Parameters<FetchLike>[1],
): Promise<T> {
  const response = await fetchImpl(url, init);
  const body = (await response.json()) as Record<string, unknown>;
  if (!response.ok) {
    const err = (body?.error ?? {}) as { code?: string; message?: string };
    throw new ApiError(
      err.code ?? "UNKNOWN",
      err.message ?? `request failed with status ${response.status}`,
      response.status,
    );
  }
  return body as T;
}

export class ReviewClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  fetchRound(): Promise<RoundPayload> {
    return call(this.fetchImpl, `${this.base}/api/session/round`);
  }

  submitSelection(roundId: string, candidateId: string): Promise<SelectReply> {
    return call(this.fetchImpl, `${this.base}/api/session/select`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ round_id: roundId, candidate_id: candidateId }),
    });
  }

  fetchStats(): Promise<StatsPayload> {
    return call(this.fetchImpl, `${this.base}/api/session/stats`);
  }

  imageUrl(candidate: Candidate): string {
    return `${this.base}${candidate.image_url}`;
  }
}

/** Parse a wire decimal string for display; NaN never escapes. */
export function asNumber(wire: string): number {
  const value = Number.parseFloat(wire);
  if (Number.isNaN(value)) {
    throw new ApiError("BAD_NUMBER", `not a decimal string: ${wire}`, 0);
  }
  return value;
}
