/**
 * Typed client for the moderation service endpoints.
 *
 * Thin by design: every method is one request, errors surface as
 * ApiError (HTTP status attached) or whatever the fetch implementation
 * throws when the service is unreachable.
 */

import type {
  Candidate,
  JudgmentAck,
  JudgmentSubmission,
  SessionReport,
  SessionSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(`${path}: ${detail}`, response.status);
    }
    return (await response.json()) as T;
  }

  async listSessions(): Promise<SessionSummary[]> {
    const body = await this.request<{ sessions: SessionSummary[] }>("/sessions");
    return body.sessions;
  }

  async createSession(
    system: "awe" | "asr",
    candidates: Candidate[],
    k = 100,
    sessionId?: string,
  ): Promise<{ session_id: string; size: number }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ system, candidates, k, session_id: sessionId ?? null }),
    });
  }

  async getCandidates(sessionId: string): Promise<Candidate[]> {
    const body = await this.request<{ candidates: Candidate[] }>(
      `/sessions/${encodeURIComponent(sessionId)}/candidates`,
    );
    return body.candidates;
  }

  async submitJudgment(sessionId: string, judgment: JudgmentSubmission): Promise<JudgmentAck> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/judgments`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(judgment),
    });
  }

  async getReport(sessionId: string): Promise<SessionReport> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/report`);
  }

  /** URL of the candidate's audio segment (service pads with context). */
  audioUrl(candidate: Candidate): string {
    const params = new URLSearchParams();
    if (candidate.end_frame > 0) {
      params.set("start_frame", String(candidate.start_frame));
      params.set("end_frame", String(candidate.end_frame));
    }
    const query = params.toString();
    const utt = encodeURIComponent(candidate.utterance_id);
    return `${this.baseUrl}/audio/${utt}${query ? `?${query}` : ""}`;
  }
}
