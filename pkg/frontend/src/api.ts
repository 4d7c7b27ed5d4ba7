/**
 * Typed client for the annotation service HTTP+JSON API.
 *
 * Endpoints: POST /sessions, GET /sessions/{id}/current,
 * POST /sessions/{id}/advance|retreat|submit, GET /export, GET /healthz.
 * Service errors arrive as {code, message} with a non-2xx status.
 */

export interface ItemDescriptor {
  session_id: string;
  subject_id?: string;
  state: "active" | "complete";
  index: number;
  total: number;
  item_id: string;
  video_url: string;
  snapshot_url: string;
  snapshot_width: number | null;
  snapshot_height: number | null;
}

export interface SubmitPayload {
  item_id?: string;
  quality?: number;
  authenticity?: number;
  marks?: [number, number][];
  categories?: string[];
  description?: string;
}

export interface SubmitAck {
  session_id: string;
  seq: number;
}

export interface ExportBundle {
  ratings: unknown[];
  fixations: unknown[];
  labels: unknown[];
}

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

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const err = body as { code?: string; message?: string };
      throw new ApiError(response.status, err.code ?? "unknown", err.message ?? "request failed");
    }
    return body as T;
  }

  createSession(subjectId: string, seed = 0): Promise<ItemDescriptor> {
    return this.request<ItemDescriptor>("/sessions", {
      method: "POST",
      body: JSON.stringify({ subject_id: subjectId, seed }),
    });
  }

  current(sessionId: string): Promise<ItemDescriptor> {
    return this.request<ItemDescriptor>(`/sessions/${sessionId}/current`);
  }

  advance(sessionId: string): Promise<ItemDescriptor> {
    return this.request<ItemDescriptor>(`/sessions/${sessionId}/advance`, { method: "POST" });
  }

  retreat(sessionId: string): Promise<ItemDescriptor> {
    return this.request<ItemDescriptor>(`/sessions/${sessionId}/retreat`, { method: "POST" });
  }

  submit(sessionId: string, payload: SubmitPayload): Promise<SubmitAck> {
    return this.request<SubmitAck>(`/sessions/${sessionId}/submit`, {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }

  exportData(includeIncomplete = false): Promise<ExportBundle> {
    return this.request<ExportBundle>(`/export?include_incomplete=${includeIncomplete}`);
  }

  async healthy(): Promise<boolean> {
    try {
      await this.request<{ status: string }>("/healthz");
      return true;
    } catch {
      return false;
    }
  }
}
