/** Typed client for the session service HTTP API (see docs/http-api.md). */

export type SessionStatus = "awaiting-answer" | "computing" | "finished";
export type QuestionKind = "binary" | "multiple-choice";

export interface WireOption {
  label: string;
  text: string;
}

export interface WireQuestion {
  id: string;
  text: string;
  kind: QuestionKind;
  options: WireOption[];
  /** Present on direct guesses ("Is it X?"); names the guessed hypothesis. */
  guess?: string;
}

export interface WireAnswer {
  question_id: string;
  option_index: number;
}

export interface HistoryPair {
  question: WireQuestion;
  answer: WireAnswer;
  answer_text: string;
}

export interface ScoreRow {
  question_id: string;
  text: string;
  score: number;
  estimator: string;
  is_guess: boolean;
}

export interface Snapshot {
  id: string;
  status: SessionStatus;
  turn: number;
  budget: number;
  pending_question: WireQuestion | null;
  history: HistoryPair[];
  belief: { count: number; hypotheses: string[] };
  last_scores: ScoreRow[];
  outcome: string | null;
  error: string | null;
}

export interface TranscriptTurn {
  index: number;
  question: WireQuestion;
  is_guess: boolean;
  answer: WireAnswer;
  answer_text: string;
  candidates: ScoreRow[];
  belief: string[];
  used_fallback: boolean;
}

export interface Transcript {
  schema_version: number;
  session_id: string;
  config: Record<string, unknown>;
  status: SessionStatus;
  outcome: string | null;
  error: string | null;
  turns: TranscriptTurn[];
}

/** Subset of the session config the wizard exposes; the service fills defaults. */
export interface SessionConfigInput {
  strategy?: string;
  question_kind?: QuestionKind;
  budget?: number;
  candidate_count?: number;
  seed?: number;
  filter?: { target_count?: number; likelihood_threshold?: number };
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly code: string,
    readonly status: number,
    message: string,
    readonly fields: Record<string, string> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

interface ErrorEnvelope {
  error?: { code?: string; message?: string; fields?: Record<string, string> };
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new ApiError("network", 0, `service unreachable: ${String(cause)}`);
    }
    const body: unknown = await response.json().catch(() => null);
    if (!response.ok) {
      const detail = (body as ErrorEnvelope | null)?.error;
      throw new ApiError(
        detail?.code ?? "http-error",
        response.status,
        detail?.message ?? `HTTP ${response.status}`,
        detail?.fields ?? {},
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createSession(config: SessionConfigInput): Promise<{ id: string }> {
    return this.post("/sessions", config);
  }

  getSnapshot(sessionId: string): Promise<Snapshot> {
    return this.request(`/sessions/${sessionId}`);
  }

  submitAnswer(sessionId: string, label: string): Promise<Snapshot> {
    return this.post(`/sessions/${sessionId}/answer`, { label });
  }

  getTranscript(sessionId: string): Promise<Transcript> {
    return this.request(`/sessions/${sessionId}/transcript`);
  }
}
