/**
 * End-to-end: boot the real review service, walk three rounds through
 * the actual view layer over HTTP, and verify two things per round:
 *
 *   1. the rendered DOM is blind — no production-route identity appears
 *      anywhere in it before the selection is committed;
 *   2. each committed selection moves the server-side tally by exactly
 *      the route the server reveals for the picked candidate.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { request } from "node:http";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import type { Readable } from "node:stream";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReviewClient } from "../src/api.js";
import type { FetchLike, StatsPayload } from "../src/api.js";
import { renderReveal, renderRound } from "../src/view.js";

const IDENTITY_WORDS = ["das", "fdmas", "mvdr", "gcf", "model"];
const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");
const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function httpBytes(
  url: string,
  init?: Parameters<FetchLike>[1],
): Promise<{ status: number; body: Buffer }> {
  return new Promise((resolvePromise, rejectPromise) => {
    // The service reads bodies by Content-Length, so announce it rather
    // than letting node fall back to chunked transfer encoding.
    const headers: Record<string, string | number> = { ...init?.headers };
    if (init?.body) headers["Content-Length"] = Buffer.byteLength(init.body);
    const req = request(
      url,
      { method: init?.method ?? "GET", headers },
      (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (chunk: Buffer) => chunks.push(chunk));
        res.on("end", () =>
          resolvePromise({
            status: res.statusCode ?? 0,
            body: Buffer.concat(chunks),
          }),
        );
      },
    );
    req.on("error", rejectPromise);
    if (init?.body) req.write(init.body);
    req.end();
  });
}

const httpFetch: FetchLike = async (url, init) => {
  const { status, body } = await httpBytes(url, init);
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => JSON.parse(body.toString("utf8")) as unknown,
  };
};

function assertBlind(root: HTMLElement, context: string): void {
  const dom = root.outerHTML.toLowerCase();
  for (const word of IDENTITY_WORDS) {
    expect(dom, `"${word}" leaked into the ${context} DOM`).not.toContain(word);
  }
}

function asCount(stats: StatsPayload, name: string): number {
  return Number.parseInt(stats.counts[name] ?? "0", 10);
}

let server: ChildProcessByStdio<null, Readable, Readable>;
let runDir: string;
let client: ReviewClient;
let base: string;

beforeAll(async () => {
  runDir = mkdtempSync(join(tmpdir(), "review-e2e-"));
  server = spawn(
    "python3",
    ["-u", "-m", "albeam.cli", "serve", "--port", "0", "--run-dir", runDir],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );

  let transcript = "";
  const port = await new Promise<number>((resolvePort, rejectPort) => {
    const timer = setTimeout(
      () => rejectPort(new Error(`service never came up:\n${transcript}`)),
      90_000,
    );
    const scan = (chunk: Buffer) => {
      transcript += chunk.toString("utf8");
      const hit = transcript.match(/serving on http:\/\/127\.0\.0\.1:(\d+)/);
      if (hit) {
        clearTimeout(timer);
        resolvePort(Number.parseInt(hit[1], 10));
      }
    };
    server.stdout.on("data", scan);
    server.stderr.on("data", scan);
    server.on("exit", (code) => {
      clearTimeout(timer);
      rejectPort(new Error(`service exited early (${code}):\n${transcript}`));
    });
  });

  base = `http://127.0.0.1:${port}`;
  client = new ReviewClient(base, httpFetch);
});

afterAll(async () => {
  if (server && server.exitCode === null) {
    const gone = new Promise<void>((resolveExit) => {
      server.on("exit", () => resolveExit());
      setTimeout(() => {
        server.kill("SIGKILL");
        resolveExit();
      }, 10_000);
    });
    server.kill("SIGTERM");
    await gone;
  }
  if (runDir) rmSync(runDir, { recursive: true, force: true });
});

describe("three blind rounds against the live service", () => {
  it("keeps every pre-submission DOM blind and moves the tally per reveal", async () => {
    const before = await client.fetchStats();
    const tally: Record<string, number> = {};

    for (let turn = 0; turn < 3; turn += 1) {
      const round = await client.fetchRound();
      expect(round.state).toBe("awaiting_selection");
      expect(round.candidates.length).toBeGreaterThanOrEqual(2);

      const root = document.createElement("div");
      let commit: (id: string) => void = () => {};
      const picked = new Promise<string>((resolvePick) => {
        commit = resolvePick;
      });
      renderRound(root, round, (c) => client.imageUrl(c), commit);

      assertBlind(root, `round ${round.round_id} pre-submission`);

      // The images themselves must be servable and anonymous: real PNG
      // bytes behind an opaque token URL.
      const image = await httpBytes(client.imageUrl(round.candidates[0]));
      expect(image.status).toBe(200);
      expect(image.body.subarray(0, 8)).toEqual(PNG_MAGIC);

      const buttons = [
        ...root.querySelectorAll<HTMLButtonElement>(".pick-button"),
      ];
      buttons[turn % buttons.length].click();
      const pickedId = await picked;
      expect(pickedId).toBe(round.candidates[turn % buttons.length].id);

      const reply = await client.submitSelection(round.round_id, pickedId);
      expect(reply.round_id).toBe(round.round_id);
      const identity = reply.revealed[pickedId];
      expect(IDENTITY_WORDS).toContain(identity);
      tally[identity] = (tally[identity] ?? 0) + 1;

      // Every candidate must be accounted for in the reveal.
      for (const candidate of round.candidates) {
        expect(reply.revealed[candidate.id]).toBeTruthy();
      }

      renderReveal(root, round, reply, pickedId);
    }

    const after = await client.fetchStats();
    expect(
      Number.parseInt(after.rounds, 10) - Number.parseInt(before.rounds, 10),
    ).toBe(3);
    const names = new Set([
      ...Object.keys(before.counts),
      ...Object.keys(after.counts),
    ]);
    for (const name of names) {
      expect(
        asCount(after, name) - asCount(before, name),
        `tally for ${name}`,
      ).toBe(tally[name] ?? 0);
    }
    expect(after.loss_history?.length ?? 0).toBe(
      (before.loss_history?.length ?? 0) + 3,
    );
  });
});
