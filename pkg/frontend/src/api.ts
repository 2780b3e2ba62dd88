// Typed client for the session service HTTP API. The UI consumes exactly
// these endpoints; the server is the source of truth for all state.

export interface TurnPayload {
  teacher: string;
  assistant: string;
}

export interface SessionPayload {
  id: string;
  created_at: string;
  updated_at: string;
  dialogue: { id: string; turns: TurnPayload[] };
  last_attribution: AttributionPayload | null;
  last_explanation: ExplanationPayload | null;
}

export interface EvidencePayload {
  turn_index: number;
  sentence_index: number;
  text: string;
  start_char: number;
  end_char: number;
}

export interface RankedSentence extends EvidencePayload {
  drop: number;
  hold: number;
  phi: number;
}

export interface TurnGainPayload {
  turn_index: number;
  gain: number;
}

export interface AttributionPayload {
  target: string;
  method: string;
  selected_turn: number | null;
  evidence: EvidencePayload;
  ranked: RankedSentence[];
  turn_gains: TurnGainPayload[] | null;
}

export interface ExplanationPayload {
  strategy_text: string;
  evidence: EvidencePayload;
  narrative: string;
  generator: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    }).then((r) => parseOrThrow<T>(r));
  }

  createSession(): Promise<{ id: string }> {
    return this.post("/sessions");
  }

  getSession(id: string): Promise<SessionPayload> {
    return this.fetchFn(this.base + `/sessions/${id}`).then((r) =>
      parseOrThrow<SessionPayload>(r),
    );
  }

  postMessage(id: string, text: string): Promise<{ reply: string }> {
    return this.post(`/sessions/${id}/messages`, { text });
  }

  attribute(
    id: string,
    target?: string,
    method?: string,
  ): Promise<AttributionPayload> {
    const body: Record<string, string> = {};
    if (target !== undefined) body.target = target;
    if (method !== undefined) body.method = method;
    return this.post(`/sessions/${id}/attribute`, body);
  }

  explain(id: string): Promise<ExplanationPayload> {
    return this.post(`/sessions/${id}/explain`);
  }
}
