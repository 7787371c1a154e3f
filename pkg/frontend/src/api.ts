/** Fetch-based client for the annotator API with judgment retry. */

import type {
  Choice,
  JudgmentAck,
  NextResponse,
  SessionCreated,
  SessionKind,
  SessionList,
  SessionReport,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface CreateSessionForm {
  kind: SessionKind;
  entity: string;
  n_synth: number;
  n_real: number;
  seed: number;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class AnnotatorClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  createSession(form: CreateSessionForm): Promise<SessionCreated> {
    return this.request<SessionCreated>("/api/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(form),
    });
  }

  listSessions(): Promise<SessionList> {
    return this.request<SessionList>("/api/sessions");
  }

  nextItem(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(
      `/api/sessions/${encodeURIComponent(sessionId)}/next`,
    );
  }

  /**
   * Submit one judgment. Network failures are retried with backoff so a
   * judgment is never silently dropped; API rejections (4xx) surface
   * immediately.
   */
  async submitJudgment(
    sessionId: string,
    itemId: string,
    choice: Choice,
    retries = 3,
  ): Promise<JudgmentAck> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= retries; attempt += 1) {
      try {
        return await this.request<JudgmentAck>(
          `/api/sessions/${encodeURIComponent(sessionId)}/judgments`,
          {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ item_id: itemId, choice }),
          },
        );
      } catch (error) {
        if (error instanceof ApiError) throw error; // server said no
        lastError = error; // transport failure: retry
        if (attempt < retries) await sleep(200 * 2 ** attempt);
      }
    }
    throw lastError instanceof Error
      ? lastError
      : new Error("judgment submission failed");
  }

  report(sessionId: string): Promise<SessionReport> {
    return this.request<SessionReport>(
      `/api/sessions/${encodeURIComponent(sessionId)}/report`,
    );
  }
}
