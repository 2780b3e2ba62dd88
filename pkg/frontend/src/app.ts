// DOM wiring: four panels (dialogue history, recommendations, evidence,
// explanation) over the session service. Mutations run strictly one at a
// time; later clicks queue behind the pending flag, and every render
// reflects a confirmed server response.

import { ApiError, Client } from "./api.js";
import { splitAtSpan } from "./highlight.js";
import {
  ViewState,
  initialState,
  withAttribution,
  withError,
  withExplanation,
  withPending,
  withReply,
  withSession,
} from "./state.js";

const client = new Client("");
let state: ViewState = initialState();
let queue: Promise<void> = Promise.resolve();

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function enqueue(mutation: () => Promise<void>): void {
  queue = queue.then(async () => {
    state = withPending(state, true);
    render();
    try {
      await mutation();
    } catch (err) {
      const message =
        err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
      state = withError(state, message);
    } finally {
      state = withPending(state, false);
      render();
    }
  });
}

function renderTranscript(): void {
  const container = $("transcript");
  container.replaceChildren();
  state.transcript.forEach((turn, i) => {
    const turnIndex = i + 1;
    const teacher = document.createElement("div");
    teacher.className = "bubble teacher";
    if (state.highlight && state.highlight.turnIndex === turnIndex) {
      const { before, marked, after } = splitAtSpan(
        turn.teacher,
        state.highlight.startChar,
        state.highlight.endChar,
      );
      teacher.append(before);
      const mark = document.createElement("mark");
      mark.textContent = marked;
      teacher.append(mark, after);
    } else {
      teacher.textContent = turn.teacher;
    }
    container.append(teacher);
    if (turn.assistant) {
      const assistant = document.createElement("div");
      assistant.className = "bubble assistant";
      assistant.textContent = turn.assistant;
      container.append(assistant);
    }
  });
  container.scrollTop = container.scrollHeight;
}

function renderRecommendations(): void {
  const container = $("recommendations");
  container.replaceChildren();
  state.transcript.forEach((turn, i) => {
    if (!turn.assistant) return;
    const row = document.createElement("div");
    row.className = "recommendation";
    const label = document.createElement("span");
    label.textContent = turn.assistant;
    const button = document.createElement("button");
    button.textContent = "Why?";
    button.disabled = state.pending;
    button.addEventListener("click", () => requestEvidence(i));
    row.append(label, button);
    container.append(row);
  });
}

function renderEvidence(): void {
  const panel = $("evidence");
  if (state.evidenceText && state.highlight) {
    panel.textContent = `Turn ${state.highlight.turnIndex}: "${state.evidenceText}"`;
    ($("explain-button") as HTMLButtonElement).disabled = state.pending;
  } else {
    panel.textContent = "No evidence requested yet.";
    ($("explain-button") as HTMLButtonElement).disabled = true;
  }
}

function render(): void {
  renderTranscript();
  renderRecommendations();
  renderEvidence();
  $("explanation").textContent =
    state.explanation ?? "No explanation requested yet.";
  $("error").textContent = state.error ?? "";
  ($("send-button") as HTMLButtonElement).disabled =
    state.pending || state.sessionId === null;
  $("session-label").textContent = state.sessionId
    ? `session ${state.sessionId.slice(0, 8)}`
    : "connecting...";
}

function sendMessage(): void {
  const input = $("message-input") as HTMLInputElement;
  const text = input.value.trim();
  if (!text || !state.sessionId) return;
  input.value = "";
  enqueue(async () => {
    const { reply } = await client.postMessage(state.sessionId!, text);
    state = withReply(state, text, reply);
  });
}

function requestEvidence(turnArrayIndex: number): void {
  const turn = state.transcript[turnArrayIndex];
  if (!turn || !state.sessionId) return;
  enqueue(async () => {
    const attribution = await client.attribute(state.sessionId!, turn.assistant);
    state = withAttribution(state, attribution);
  });
}

function requestExplanation(): void {
  if (!state.sessionId) return;
  enqueue(async () => {
    const explanation = await client.explain(state.sessionId!);
    state = withExplanation(state, explanation);
  });
}

export function boot(): void {
  $("send-button").addEventListener("click", sendMessage);
  ($("message-input") as HTMLInputElement).addEventListener("keydown", (e) => {
    if (e.key === "Enter") sendMessage();
  });
  $("explain-button").addEventListener("click", requestExplanation);
  enqueue(async () => {
    const params = new URLSearchParams(window.location.search);
    const existing = params.get("session");
    const id = existing ?? (await client.createSession()).id;
    state = withSession(state, await client.getSession(id));
  });
}

boot();
