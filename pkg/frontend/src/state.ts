// View state and its pure transitions. Every transition takes a confirmed
// server response; the UI never mutates the transcript on its own, and a
// highlight is only accepted if it indexes an existing turn in bounds.

import type {
  AttributionPayload,
  ExplanationPayload,
  SessionPayload,
  TurnPayload,
} from "./api.js";
import { splitAtSpan } from "./highlight.js";

export interface Highlight {
  turnIndex: number; // 1-based, mirrors the service
  startChar: number;
  endChar: number;
}

export interface ViewState {
  sessionId: string | null;
  transcript: TurnPayload[];
  pending: boolean;
  highlight: Highlight | null;
  evidenceText: string | null;
  attribution: AttributionPayload | null;
  explanation: string | null;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    transcript: [],
    pending: false,
    highlight: null,
    evidenceText: null,
    attribution: null,
    explanation: null,
    error: null,
  };
}

function checkedHighlight(
  transcript: TurnPayload[],
  attribution: AttributionPayload,
): { highlight: Highlight; evidenceText: string } {
  const evidence = attribution.evidence;
  const turn = transcript[evidence.turn_index - 1];
  if (turn === undefined) {
    throw new RangeError(
      `evidence references turn ${evidence.turn_index} of a ${transcript.length}-turn transcript`,
    );
  }
  const segments = splitAtSpan(
    turn.teacher,
    evidence.start_char,
    evidence.end_char,
  );
  return {
    highlight: {
      turnIndex: evidence.turn_index,
      startChar: evidence.start_char,
      endChar: evidence.end_char,
    },
    evidenceText: segments.marked,
  };
}

/** Rehydrate everything from GET /sessions/{id}. */
export function withSession(state: ViewState, session: SessionPayload): ViewState {
  const next: ViewState = {
    ...state,
    sessionId: session.id,
    transcript: session.dialogue.turns,
    highlight: null,
    evidenceText: null,
    attribution: null,
    explanation: session.last_explanation?.narrative ?? null,
    error: null,
  };
  if (session.last_attribution !== null) {
    const checked = checkedHighlight(next.transcript, session.last_attribution);
    next.attribution = session.last_attribution;
    next.highlight = checked.highlight;
    next.evidenceText = checked.evidenceText;
  }
  return next;
}

/** Append a turn confirmed by POST /messages. */
export function withReply(
  state: ViewState,
  teacherText: string,
  reply: string,
): ViewState {
  return {
    ...state,
    transcript: [...state.transcript, { teacher: teacherText, assistant: reply }],
    error: null,
  };
}

/** Apply an attribution confirmed by POST /attribute. */
export function withAttribution(
  state: ViewState,
  attribution: AttributionPayload,
): ViewState {
  const checked = checkedHighlight(state.transcript, attribution);
  return {
    ...state,
    attribution,
    highlight: checked.highlight,
    evidenceText: checked.evidenceText,
    explanation: null,
    error: null,
  };
}

export function withExplanation(
  state: ViewState,
  explanation: ExplanationPayload,
): ViewState {
  return { ...state, explanation: explanation.narrative, error: null };
}

export function withError(state: ViewState, message: string): ViewState {
  return { ...state, error: message };
}

export function withPending(state: ViewState, pending: boolean): ViewState {
  return { ...state, pending };
}
