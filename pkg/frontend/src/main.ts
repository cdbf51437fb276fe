/**
 * Browser entry point: wires the API client to the renderers.
 *
 * Served same-origin by the review service, so the client base is empty
 * and all requests stay on the page's host.
 */

import { ApiError, ReviewClient } from "./api.js";
import type { RoundPayload } from "./api.js";
import { renderReveal, renderRound, renderStats } from "./view.js";

const client = new ReviewClient();

function mount(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in page shell`);
  return node;
}

const roundRoot = mount("round");
const statsRoot = mount("stats");
const messageRoot = mount("message");

function showError(err: unknown): void {
  const text =
    err instanceof ApiError
      ? `${err.code}: ${err.message}`
      : err instanceof Error
        ? err.message
        : String(err);
  messageRoot.textContent = text;
  messageRoot.classList.add("error");
}

function clearError(): void {
  messageRoot.textContent = "";
  messageRoot.classList.remove("error");
}

async function refreshStats(): Promise<void> {
  const stats = await client.fetchStats();
  renderStats(statsRoot, stats);
}

async function nextRound(): Promise<void> {
  clearError();
  const round = await client.fetchRound();
  renderRound(
    roundRoot,
    round,
    (candidate) => client.imageUrl(candidate),
    (candidateId) => void submit(round, candidateId).catch(showError),
  );
}

async function submit(round: RoundPayload, candidateId: string): Promise<void> {
  const reply = await client.submitSelection(round.round_id, candidateId);
  renderReveal(roundRoot, round, reply, candidateId);
  const next = roundRoot.querySelector<HTMLButtonElement>(".next-button");
  next?.addEventListener("click", () => void nextRound().catch(showError));
  await refreshStats();
}

void (async () => {
  try {
    await refreshStats();
    await nextRound();
  } catch (err) {
    showError(err);
  }
})();
