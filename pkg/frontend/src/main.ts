// DOM glue: session form, the coding card, completion screen, retry banner.
// Post text is rendered verbatim (textContent, never innerHTML) so Japanese
// text and emoticons survive untouched. The card shows no hint of which
// keyword list selected the post and never displays estimator output.

import { ApiClient, DIMENSIONS, Dimension, Label } from "./api.js";
import { CardController } from "./card.js";
import { actionForKey } from "./shortcuts.js";

const LABELS: Label[] = ["positive", "neutral", "negative"];

const client = new ApiClient();
let controller: CardController | null = null;
let activeDimension: Dimension = DIMENSIONS[0];

const el = (id: string) => document.getElementById(id) as HTMLElement;

function show(section: "session" | "card" | "done"): void {
  el("session-form").hidden = section !== "session";
  el("card-view").hidden = section !== "card";
  el("done-view").hidden = section !== "done";
}

function banner(message: string | null): void {
  const node = el("banner");
  node.hidden = message === null;
  node.textContent = message ?? "";
}

function renderCard(): void {
  if (!controller || !controller.current) return;
  el("post-text").textContent = controller.current.text ?? "";
  el("remaining").textContent = String(controller.current.remaining);
  el("offtopic-toggle").classList.toggle("on", controller.state.offtopic);
  for (const dimension of DIMENSIONS) {
    const row = el(`row-${dimension}`);
    row.classList.toggle("active", dimension === activeDimension);
    for (const label of LABELS) {
      const button = el(`btn-${dimension}-${label}`);
      button.classList.toggle("on", controller.state.selection(dimension) === label);
    }
  }
}

async function renderDone(): Promise<void> {
  show("done");
  try {
    const counts = await client.progress();
    el("progress-list").textContent = DIMENSIONS.map((d) => `${d}: ${counts[d] ?? 0}`).join("   ");
  } catch {
    el("progress-list").textContent = "";
  }
}

async function withRetryBanner<T>(work: () => Promise<T>): Promise<T | null> {
  try {
    const result = await work();
    banner(null);
    return result;
  } catch (error) {
    // network failures and server errors: keep all card state, offer retry
    banner(`Server unreachable or rejected the request - press Enter to retry (${error})`);
    return null;
  }
}

async function loadCard(): Promise<void> {
  if (!controller) return;
  const outcome = await withRetryBanner(() => controller!.load());
  if (outcome === null) return;
  if (outcome === "done") {
    await renderDone();
  } else {
    show("card");
    renderCard();
  }
}

async function submitCard(): Promise<void> {
  if (!controller) return;
  const outcome = await withRetryBanner(() => controller!.submit());
  if (outcome === null) return;
  if (outcome === "done") {
    await renderDone();
  } else {
    if (outcome === "reloaded") {
      banner("Another client moved this session forward; showing the current post.");
    }
    show("card");
    renderCard();
  }
}

function applyLabel(dimension: Dimension, label: Label): void {
  if (!controller) return;
  if (controller.state.selection(dimension) === label) {
    controller.state.clear(dimension);
  } else {
    controller.state.select(dimension, label);
  }
  renderCard();
}

function handleKey(event: KeyboardEvent): void {
  if (!controller || el("card-view").hidden) return;
  const action = actionForKey(event.key);
  if (!action) return;
  event.preventDefault();
  switch (action.kind) {
    case "dimension":
      activeDimension = action.dimension;
      renderCard();
      break;
    case "label":
      applyLabel(activeDimension, action.label);
      break;
    case "offtopic":
      controller.state.toggleOfftopic();
      renderCard();
      break;
    case "clear":
      controller.state.clear(activeDimension);
      renderCard();
      break;
    case "submit":
      void submitCard();
      break;
  }
}

function buildCardDom(): void {
  const rows = el("dimension-rows");
  DIMENSIONS.forEach((dimension, i) => {
    const row = document.createElement("div");
    row.className = "dim-row";
    row.id = `row-${dimension}`;
    const name = document.createElement("span");
    name.className = "dim-name";
    name.textContent = `${i + 1} ${dimension}`;
    row.appendChild(name);
    for (const label of LABELS) {
      const button = document.createElement("button");
      button.id = `btn-${dimension}-${label}`;
      button.textContent = label;
      button.addEventListener("click", () => {
        activeDimension = dimension;
        applyLabel(dimension, label);
      });
      row.appendChild(button);
    }
    rows.appendChild(row);
  });
  el("offtopic-toggle").addEventListener("click", () => {
    controller?.state.toggleOfftopic();
    renderCard();
  });
  el("submit-button").addEventListener("click", () => void submitCard());
}

async function openSession(event: Event): Promise<void> {
  event.preventDefault();
  const coder = (el("coder-id") as HTMLInputElement).value.trim();
  const pool = (el("dimension-pool") as HTMLSelectElement).value;
  const seed = Number((el("seed") as HTMLInputElement).value || "0");
  if (!coder) return;
  const session = await withRetryBanner(() => client.openSession(coder, pool, seed));
  if (session === null) return;
  controller = new CardController(client, session.session_id);
  await loadCard();
}

document.addEventListener("DOMContentLoaded", () => {
  buildCardDom();
  el("open-session").addEventListener("submit", (e) => void openSession(e));
  document.addEventListener("keydown", handleKey);
  show("session");
});
