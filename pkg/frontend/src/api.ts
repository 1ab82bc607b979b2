// Thin fetch wrappers over the gateway REST surface.

import type {
  PersonaSummary,
  SessionDescriptor,
  Transcript,
} from "./protocol.js";

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(code: string, status: number, message: string) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<ApiError> {
  let code = "internal";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body: keep the status fallback
  }
  return new ApiError(code, response.status, message);
}

/** The surface the console needs; tests substitute lightweight fakes. */
export interface GatewayApi {
  listPersonas(): Promise<PersonaSummary[]>;
  createSession(personaId: string): Promise<SessionDescriptor>;
  getSession(sessionId: string): Promise<SessionDescriptor>;
  closeSession(sessionId: string): Promise<SessionDescriptor>;
  submitTextTurn(sessionId: string, text: string): Promise<{ job_id: string }>;
  submitAudioTurn(sessionId: string, wav: Blob): Promise<{ job_id: string }>;
  getTranscript(sessionId: string): Promise<Transcript>;
  mediaUrl(path: string): string;
}

export class GatewayClient implements GatewayApi {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  listPersonas(): Promise<PersonaSummary[]> {
    return this.request("/api/personas");
  }

  createSession(personaId: string): Promise<SessionDescriptor> {
    return this.request("/api/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ persona_id: personaId }),
    });
  }

  getSession(sessionId: string): Promise<SessionDescriptor> {
    return this.request(`/api/sessions/${sessionId}`);
  }

  closeSession(sessionId: string): Promise<SessionDescriptor> {
    return this.request(`/api/sessions/${sessionId}`, { method: "DELETE" });
  }

  submitTextTurn(sessionId: string, text: string): Promise<{ job_id: string }> {
    return this.request(`/api/sessions/${sessionId}/turns`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  submitAudioTurn(sessionId: string, wav: Blob): Promise<{ job_id: string }> {
    const form = new FormData();
    form.append("audio", wav, "question.wav");
    return this.request(`/api/sessions/${sessionId}/turns`, {
      method: "POST",
      body: form,
    });
  }

  getTranscript(sessionId: string): Promise<Transcript> {
    return this.request(`/api/sessions/${sessionId}/transcript`);
  }

  mediaUrl(path: string): string {
    return this.baseUrl + path;
  }
}
