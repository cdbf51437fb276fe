import { describe, expect, it } from "vitest";

import { ApiError, ReviewClient, asNumber } from "../src/api.js";
import type { FetchLike } from "../src/api.js";

function stubFetch(
  status: number,
  body: unknown,
  calls: { url: string; init?: Parameters<FetchLike>[1] }[],
): FetchLike {
  return async (url, init) => {
    calls.push({ url, init });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    };
  };
}

const ROUND = {
  round_id: "7",
  state: "awaiting_selection",
  criteria: ["sharp target", "clean background", "even texture"],
  candidates: [
    { id: "a".repeat(32), image_url: `/api/image/${"a".repeat(32)}` },
    { id: "b".repeat(32), image_url: `/api/image/${"b".repeat(32)}` },
  ],
};

describe("ReviewClient", () => {
  it("fetches a round from the session endpoint", async () => {
    const calls: { url: string }[] = [];
    const client = new ReviewClient("http://x:1", stubFetch(200, ROUND, calls));
    const round = await client.fetchRound();
    expect(calls[0].url).toBe("http://x:1/api/session/round");
    expect(round.round_id).toBe("7");
    expect(round.candidates).toHaveLength(2);
  });

  it("posts selections as JSON with round and candidate ids", async () => {
    const calls: { url: string; init?: Parameters<FetchLike>[1] }[] = [];
    const reply = {
      round_id: "7",
      loss: "0.125",
      step_skipped: false,
      stats: { rounds: "7", counts: {}, percentages: {} },
      revealed: {},
    };
    const client = new ReviewClient("", stubFetch(200, reply, calls));
    await client.submitSelection("7", "c".repeat(32));
    const { url, init } = calls[0];
    expect(url).toBe("/api/session/select");
    expect(init?.method).toBe("POST");
    expect(init?.headers?.["Content-Type"]).toBe("application/json");
    expect(JSON.parse(init?.body ?? "{}")).toEqual({
      round_id: "7",
      candidate_id: "c".repeat(32),
    });
  });

  it("keeps wire numerics as strings until explicitly parsed", async () => {
    const stats = {
      rounds: "12",
      counts: { alpha: "5" },
      percentages: { alpha: "41.66666666666667" },
    };
    const client = new ReviewClient("", stubFetch(200, stats, []));
    const got = await client.fetchStats();
    expect(got.percentages.alpha).toBe("41.66666666666667");
    expect(asNumber(got.percentages.alpha)).toBeCloseTo(41.6667, 3);
  });

  it("raises a typed error from the error envelope", async () => {
    const body = { error: { code: "ROUND_MISMATCH", message: "stale round" } };
    const client = new ReviewClient("", stubFetch(409, body, []));
    const err = await client
      .submitSelection("1", "d".repeat(32))
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("ROUND_MISMATCH");
    expect((err as ApiError).status).toBe(409);
  });

  it("builds image URLs against the client base", () => {
    const client = new ReviewClient("http://x:1", stubFetch(200, {}, []));
    expect(client.imageUrl(ROUND.candidates[0])).toBe(
      `http://x:1/api/image/${"a".repeat(32)}`,
    );
  });

  it("rejects non-numeric wire strings instead of yielding NaN", () => {
    expect(() => asNumber("oops")).toThrow(ApiError);
  });
});
