/**
 * Pure DOM renderers for the blind review flow.
 *
 * The central rule: before a selection is submitted, the page must give
 * the reviewer no hint of how any candidate image was produced.  Render
 * functions here therefore label candidates with neutral letters only;
 * identities appear solely in the post-submission reveal panel, built
 * from the server's reveal payload.
 */

import { asNumber } from "./api.js";
import type {
  Candidate,
  RoundPayload,
  SelectReply,
  StatsPayload,
} from "./api.js";

const LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

export function candidateLabel(index: number): string {
  return `Candidate ${LETTERS[index % LETTERS.length]}`;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/**
 * Render a round of anonymous candidates.  `imageUrl` maps a candidate
 * to a full image URL (the client knows the API base; the view does not).
 * `onPick` fires with the opaque candidate id when the reviewer commits.
 */
export function renderRound(
  root: HTMLElement,
  round: RoundPayload,
  imageUrl: (candidate: Candidate) => string,
  onPick: (candidateId: string) => void,
): void {
  root.replaceChildren();

  const heading = el("h2", "round-heading", `Round ${round.round_id}`);
  root.append(heading);

  const criteria = el("ul", "criteria");
  for (const criterion of round.criteria) {
    criteria.append(el("li", "criterion", criterion));
  }
  root.append(criteria);

  const grid = el("div", "candidate-grid");
  round.candidates.forEach((candidate, index) => {
    const card = el("figure", "candidate-card");
    card.dataset.candidateId = candidate.id;

    const img = el("img", "candidate-image");
    img.src = imageUrl(candidate);
    img.alt = candidateLabel(index);
    card.append(img);

    const caption = el("figcaption", "candidate-caption");
    caption.append(el("span", "candidate-name", candidateLabel(index)));

    const button = el("button", "pick-button", "This one");
    button.type = "button";
    button.addEventListener("click", () => onPick(candidate.id));
    caption.append(button);

    card.append(caption);
    grid.append(card);
  });
  root.append(grid);
}

/**
 * Render the post-submission reveal: which production route made each
 * candidate, the training loss the pick drove, and whether the update
 * step ran.  This is the only renderer allowed to show identities.
 */
export function renderReveal(
  root: HTMLElement,
  round: RoundPayload,
  reply: SelectReply,
  pickedId: string,
): void {
  root.replaceChildren();

  const heading = el("h2", "reveal-heading", `Round ${reply.round_id} — revealed`);
  root.append(heading);

  const list = el("ul", "reveal-list");
  round.candidates.forEach((candidate, index) => {
    const identity = reply.revealed[candidate.id] ?? "?";
    const item = el(
      "li",
      "reveal-item",
      `${candidateLabel(index)}: ${identity}`,
    );
    if (candidate.id === pickedId) {
      item.classList.add("picked");
      item.textContent += "  (your pick)";
    }
    list.append(item);
  });
  root.append(list);

  const loss = el("p", "reveal-loss", `training loss ${reply.loss}`);
  if (reply.step_skipped) {
    loss.textContent += " (warm-up round, no update step)";
  }
  root.append(loss);

  const next = el("button", "next-button", "Next round");
  next.type = "button";
  root.append(next);
}

function sparkline(history: { loss: string; step_skipped: boolean }[]): SVGSVGElement {
  const svgNS = "http://www.w3.org/2000/svg";
  const width = 320;
  const height = 72;
  const pad = 6;
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "loss-sparkline");
  svg.setAttribute("role", "img");
  svg.setAttribute("aria-label", "training loss per round");

  const points = history
    .filter((p) => !p.step_skipped)
    .map((p) => asNumber(p.loss));
  if (points.length === 0) return svg;

  const lo = Math.min(...points);
  const hi = Math.max(...points);
  const span = hi - lo || 1;
  const step = points.length > 1 ? (width - 2 * pad) / (points.length - 1) : 0;
  const coords = points.map((value, i) => {
    const x = pad + i * step;
    const y = height - pad - ((value - lo) / span) * (height - 2 * pad);
    return `${x.toFixed(1)},${y.toFixed(1)}`;
  });

  const line = document.createElementNS(svgNS, "polyline");
  line.setAttribute("points", coords.join(" "));
  line.setAttribute("fill", "none");
  line.setAttribute("class", "loss-line");
  svg.append(line);
  return svg;
}

/** Render the running tally: per-route counts and the loss history. */
export function renderStats(root: HTMLElement, stats: StatsPayload): void {
  root.replaceChildren();

  const heading = el("h2", "stats-heading", `After ${stats.rounds} rounds`);
  root.append(heading);

  const table = el("table", "stats-table");
  const head = el("tr");
  head.append(el("th", undefined, "route"));
  head.append(el("th", undefined, "picks"));
  head.append(el("th", undefined, "share"));
  table.append(head);

  for (const [name, count] of Object.entries(stats.counts)) {
    const row = el("tr");
    row.append(el("td", "route-name", name));
    row.append(el("td", "route-count", count));
    const pct = stats.percentages[name];
    row.append(
      el("td", "route-share", pct ? `${asNumber(pct).toFixed(1)}%` : "—"),
    );
    table.append(row);
  }
  root.append(table);

  if (stats.loss_history && stats.loss_history.length > 0) {
    root.append(sparkline(stats.loss_history));
  }
}
