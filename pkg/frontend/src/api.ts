// Thin typed client over the server's REST endpoints. The server is the
// single source of truth; this module only moves JSON.

import type {
  DesignerCriteria,
  GameDefinition,
  PlayerInput,
  SessionState,
  TranscriptEntry,
  TurnResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GameApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, {
        method,
        headers: { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "unreachable", `server unreachable: ${String(err)}`);
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      // fall through: non-JSON bodies become generic errors below
    }
    if (!response.ok) {
      const error = (payload ?? {}) as { code?: string; message?: string };
      throw new ApiError(
        response.status,
        error.code ?? "unknown_error",
        error.message ?? `request failed with status ${response.status}`,
      );
    }
    return payload as T;
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchFn(`${this.baseUrl}/healthz`, { method: "GET" });
      return response.ok;
    } catch {
      return false;
    }
  }

  createSession(
    criteria: DesignerCriteria,
    validationEnabled: boolean,
  ): Promise<{ session_id: string; definition: GameDefinition }> {
    return this.request("POST", "/sessions", {
      criteria,
      validation_enabled: validationEnabled,
    });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  getTranscript(sessionId: string): Promise<{ session_id: string; transcript: TranscriptEntry[] }> {
    return this.request("GET", `/sessions/${sessionId}/transcript`);
  }

  postTurn(sessionId: string, input: PlayerInput): Promise<TurnResponse> {
    return this.request("POST", `/sessions/${sessionId}/turns`, { input });
  }

  setValidation(sessionId: string, enabled: boolean): Promise<{ session_id: string; enabled: boolean }> {
    return this.request("PUT", `/sessions/${sessionId}/validation`, { enabled });
  }
}
